"""Penultimate (finite-horizon) extreme-value approximations.

For a smooth distribution F, the maximum of m draws is better described by
a GEV whose shape varies with m than by the limit shape.  With

    s(y) = -F(y) log F(y) / f(y)        (block maxima)
    r(y) = (1 - F(y)) / f(y)            (reciprocal hazard, thresholds)

the m-block penultimate approximation is GEV(b_m, a_m, s'(b_m)) where b_m
solves -log F(b_m) = 1/m and a_m = s(b_m); the threshold analogue at the
q-quantile u replaces the limit shape by r'(u).  Derivatives are taken by
five-point central differences: callers supply only (cdf, pdf, dpdf).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .families import GevParams

__all__ = [
    "SmoothDist",
    "PenultResult",
    "s_fun",
    "r_fun",
    "penult_shape_bm",
    "penult_shape_pot",
    "penult_gev",
]


@dataclass(frozen=True)
class SmoothDist:
    """A thrice-differentiable distribution given by (cdf, pdf, pdf')."""

    cdf: Callable[[float], float]
    pdf: Callable[[float], float]
    dpdf: Callable[[float], float]
    upper_endpoint: float = math.inf
    lower_endpoint: float = -math.inf
    xi_star: Optional[float] = None  # limiting shape, when known
    name: str = ""


@dataclass(frozen=True)
class PenultResult:
    b_m: float
    a_m: float
    shape: float
    xi_star: Optional[float]

    def __post_init__(self):
        if not (self.a_m > 0.0):
            raise ValueError("penultimate scale must be positive")


def s_fun(y: float, dist: SmoothDist) -> float:
    F = dist.cdf(y)
    f = dist.pdf(y)
    if not (0.0 < F < 1.0) or not (f > 0.0):
        raise ValueError(f"s(y) undefined at y={y}: F={F}, f={f}")
    return -F * math.log(F) / f


def r_fun(y: float, dist: SmoothDist) -> float:
    F = dist.cdf(y)
    f = dist.pdf(y)
    if not (f > 0.0):
        raise ValueError(f"r(y) undefined at y={y}: f={f}")
    return (1.0 - F) / f


def _deriv5(g: Callable[[float], float], y: float) -> float:
    """Five-point central difference with the step tied to |y|."""
    h = max(1e-5, 1e-5 * abs(y))
    return (-g(y + 2 * h) + 8.0 * g(y + h) - 8.0 * g(y - h) + g(y - 2 * h)) / (12.0 * h)


def _solve_logF(dist: SmoothDist, target: float) -> float:
    """Root of log F(y) = target (target < 0) by bracketed bisection.

    Brackets grow geometrically from a unit guess; endpoints clamp the
    expansion for bounded supports.
    """

    def logF(y: float) -> float:
        F = dist.cdf(y)
        if F <= 0.0:
            return -math.inf
        if F >= 1.0:
            return 0.0
        return math.log(F)

    hi = 1.0
    for _ in range(400):
        if np.isfinite(dist.upper_endpoint):
            hi = min(hi, dist.upper_endpoint - 1e-12 * max(1.0, abs(dist.upper_endpoint)))
        if logF(hi) > target:
            break
        if np.isfinite(dist.upper_endpoint) and hi >= dist.upper_endpoint - 1e-9 * max(1.0, abs(dist.upper_endpoint)):
            break
        hi = 2.0 * hi + 1.0
    else:
        raise RuntimeError("failed to bracket the upper end")

    lo = min(-1.0, hi - 1.0)
    for _ in range(400):
        if np.isfinite(dist.lower_endpoint):
            lo = max(lo, dist.lower_endpoint + 1e-12 * max(1.0, abs(dist.lower_endpoint)))
        if logF(lo) < target:
            break
        if np.isfinite(dist.lower_endpoint) and lo <= dist.lower_endpoint + 1e-9 * max(1.0, abs(dist.lower_endpoint)):
            break
        lo = 2.0 * lo - 1.0
    else:
        raise RuntimeError("failed to bracket the lower end")

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if logF(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13 * max(1.0, abs(hi)):
            break
    mid = 0.5 * (lo + hi)
    if abs(dist.cdf(mid) - math.exp(target)) > 1e-9:
        raise RuntimeError(f"bisection did not converge: F={dist.cdf(mid)} vs {math.exp(target)}")
    return mid


def penult_shape_bm(m: float, dist: SmoothDist) -> PenultResult:
    """Penultimate GEV ingredients for the maximum of m draws."""
    if m < 1.0:
        raise ValueError("block size m must be >= 1")
    b_m = _solve_logF(dist, -1.0 / m)
    a_m = s_fun(b_m, dist)
    shape = _deriv5(lambda t: s_fun(t, dist), b_m)
    return PenultResult(b_m=b_m, a_m=a_m, shape=shape, xi_star=dist.xi_star)


def penult_shape_pot(q: float, dist: SmoothDist) -> PenultResult:
    """Threshold version: shape r'(u) at the q-quantile threshold u."""
    if not (0.0 < q < 1.0):
        raise ValueError("q must be a probability")
    u = _solve_logF(dist, math.log(q))
    shape = _deriv5(lambda t: r_fun(t, dist), u)
    return PenultResult(b_m=u, a_m=r_fun(u, dist), shape=shape, xi_star=dist.xi_star)


def penult_gev(m: float, dist: SmoothDist) -> GevParams:
    """GEV(b_m, a_m, s'(b_m)) approximation to the m-draw maximum."""
    res = penult_shape_bm(m, dist)
    return GevParams(res.b_m, res.a_m, res.shape)
