"""Stable numerical kernels shared by the extreme-value likelihoods.

Every distribution in this package (generalized extreme value, generalized
Pareto, point-process and r-largest variants) is built from the same two
scalar primitives of the standardized residual z and the shape xi:

    A(z, xi) = log(1 + xi*z) / xi        (-> z as xi -> 0)
    E(z, xi) = exp(-A) = (1 + xi*z)^(-1/xi)

A is the Box-Cox style log transform: -A is the log survivor function of the
generalized Pareto, E is the exponent of the GEV distribution function and the
mean measure of the limiting point process.  Log-densities, scores and
observed information assemble from A, its first/second partials and powers of
w = 1 + xi*z, so those partials are computed here once, with series branches
where the closed forms cancel catastrophically.

Reparametrizations of the form psi = anchor + scale * h(xi) (return levels,
tail quantiles, tail means) need h and its first two xi-derivatives; the
KappaFun classes at the bottom provide them with the same care near xi = 0.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy import special

__all__ = [
    "EULER_GAMMA",
    "XI_TINY",
    "ShapeKernels",
    "shape_kernels",
    "boxcox_log",
    "PowerKappa",
    "GumbelMeanKappa",
]

# Euler-Mascheroni constant, 20 significant digits.
EULER_GAMMA = 0.57721566490153286061

# |xi| below which the xi-derivative kernels switch to series.  The series
# additionally requires |xi*z| to be small; see shape_kernels.
XI_TINY = 1.0e-4


class ShapeKernels(NamedTuple):
    """Pointwise primitives for arrays z against a scalar shape xi.

    All arrays have the shape of z.  Entries where the support constraint
    w = 1 + xi*z > 0 fails are numpy.nan; callers must consult `ok`.
    """

    ok: np.ndarray      # support mask, w > 0
    w: np.ndarray       # 1 + xi*z
    logw: np.ndarray    # log w
    A: np.ndarray       # log(w)/xi
    A_z: np.ndarray     # dA/dz   = 1/w
    A_x: np.ndarray     # dA/dxi
    A_zz: np.ndarray    # d2A/dz2 = -xi/w^2
    A_zx: np.ndarray    # d2A/dz dxi = -z/w^2
    A_xx: np.ndarray    # d2A/dxi2


def shape_kernels(z, xi: float) -> ShapeKernels:
    """A(z, xi) and partials, stable for any xi including 0.

    The value-level quantities (A, logw) never cancel: log1p carries them.
    A_x and A_xx are evaluated from closed forms except where both |xi| and
    |xi*z| are tiny, where an alternating series in xi*z takes over.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    q = xi * z
    w = 1.0 + q
    ok = w > 0.0

    ws = np.where(ok, w, np.nan)
    qs = np.where(ok, q, np.nan)
    logw = np.where(ok, np.log1p(np.where(ok, q, 0.0)), np.nan)

    if xi == 0.0:
        A = np.where(ok, z, np.nan)
        A_z = np.where(ok, np.ones_like(z), np.nan)
        A_zz = np.zeros_like(z)
        A_zx = np.where(ok, -z, np.nan)  # w = 1
        A_x = np.where(ok, -0.5 * z * z, np.nan)
        A_xx = np.where(ok, (2.0 / 3.0) * z**3, np.nan)
        return ShapeKernels(ok, w, logw, A, A_z, A_x, A_zz, A_zx, A_xx)

    A = logw / xi
    A_z = 1.0 / ws
    A_zz = -xi / ws**2
    A_zx = -z / ws**2

    # closed forms for the xi-partials
    with np.errstate(invalid="ignore"):
        A_x = (z / ws - A) / xi
        A_xx = -(2.0 / xi) * A_x - z * z / (xi * ws * ws)

    if abs(xi) < XI_TINY:
        # series in q = xi*z where the closed form loses ~|1/q| digits
        tiny = ok & (np.abs(qs) < 1.0e-2)
        if np.any(tiny):
            zt = z[tiny]
            qt = q[tiny]
            # A = z sum_{k>=1} (-q)^(k-1)/k; logw/xi breaks if q underflows
            A_t = zt * (1.0 - qt * (1.0 / 2.0 - qt * (1.0 / 3.0 - qt * (1.0 / 4.0 - qt * (1.0 / 5.0 - qt * (1.0 / 6.0 - qt / 7.0))))))
            # A_x  = sum_{k>=2} (-1)^(k-1) (k-1)/k xi^(k-2) z^k
            A_x_t = zt**2 * (-1.0 / 2.0 + qt * (2.0 / 3.0 + qt * (-3.0 / 4.0 + qt * (4.0 / 5.0 + qt * (-5.0 / 6.0 + qt * 6.0 / 7.0)))))
            # A_xx = sum_{k>=3} (-1)^(k-1) (k-1)(k-2)/k xi^(k-3) z^k
            A_xx_t = zt**3 * (2.0 / 3.0 + qt * (-3.0 / 2.0 + qt * (12.0 / 5.0 + qt * (-10.0 / 3.0 + qt * 30.0 / 7.0))))
            A = np.array(A, copy=True)
            A_x = np.array(A_x, copy=True)
            A_xx = np.array(A_xx, copy=True)
            A[tiny] = A_t
            A_x[tiny] = A_x_t
            A_xx[tiny] = A_xx_t

    return ShapeKernels(ok, w, logw, A, A_z, A_x, A_zz, A_zx, A_xx)


def boxcox_log(z, xi: float):
    """A(z, xi) = log1p(xi*z)/xi alone, nan outside support."""
    z = np.asarray(z, dtype=float)
    q = xi * z
    ok = 1.0 + q > 0.0
    logw = np.where(ok, np.log1p(np.where(ok, q, 0.0)), np.nan)
    if xi == 0.0:
        return np.where(ok, z, np.nan)
    A = logw / xi
    if abs(xi) < XI_TINY:
        tiny = ok & (np.abs(q) < 1.0e-2)
        if np.any(tiny):
            qt = q[tiny]
            A = np.array(A, copy=True)
            A[tiny] = z[tiny] * (1.0 - qt * (1.0 / 2.0 - qt * (1.0 / 3.0 - qt * (1.0 / 4.0 - qt * (1.0 / 5.0 - qt * (1.0 / 6.0 - qt / 7.0))))))
    return A


# ---------------------------------------------------------------------------
# h(xi) = (kappa(xi) - 1)/xi  reparametrization kernels
# ---------------------------------------------------------------------------


class PowerKappa:
    """h(xi) = (c^xi - 1)/xi = expm1(xi*L)/xi with L = log c.

    Covers return levels (c = -1/log(1 - 1/T)), tail quantiles
    (c = -T/log p) and any other pure power kappa.  h(0) = L.
    """

    def __init__(self, log_c: float):
        self.L = float(log_c)

    def h(self, xi: float) -> float:
        L = self.L
        t = xi * L
        if abs(t) < 1.0e-8:
            # series in t; also dodges underflow when xi is subnormal
            return L * (1.0 + 0.5 * t)
        return np.expm1(t) / xi

    def dh(self, xi: float) -> float:
        L = self.L
        t = xi * L
        if abs(t) < 1.0e-4 and abs(xi) < XI_TINY:
            return L * L * (0.5 + t / 3.0 + t * t / 8.0)
        return (L * np.exp(t) - self.h(xi)) / xi

    def d2h(self, xi: float) -> float:
        L = self.L
        t = xi * L
        if abs(t) < 1.0e-4 and abs(xi) < XI_TINY:
            return L**3 * (1.0 / 3.0 + t / 4.0 + t * t / 10.0)
        return (L * L * np.exp(t) - 2.0 * self.dh(xi)) / xi


class GumbelMeanKappa:
    """h(xi) = (T^xi * Gamma(1 - xi) - 1)/xi, for expected maxima.

    kappa(xi) = exp(c(xi)) with c(xi) = xi log T + lgamma(1 - xi); requires
    xi < 1.  h(0) = log T + Euler's constant.
    """

    def __init__(self, log_T: float):
        self.logT = float(log_T)

    def _c(self, xi: float) -> float:
        return xi * self.logT + special.gammaln(1.0 - xi)

    def _c1(self, xi: float) -> float:
        return self.logT - special.digamma(1.0 - xi)

    def h(self, xi: float) -> float:
        if xi >= 1.0:
            return np.nan
        if abs(xi) < 1.0e-8:
            B1, B2, B3, B4 = self._series(xi)
            return B1 + xi * (B2 + xi * B3)
        return np.expm1(self._c(xi)) / xi

    def _series(self, xi: float):
        # Taylor coefficients of c at 0: c = c1 x + c2 x^2/2 + c3 x^3/6 + c4 x^4/24
        c1 = self.logT + EULER_GAMMA
        c2 = special.polygamma(1, 1.0)          # pi^2/6
        c3 = -special.polygamma(2, 1.0)
        c4 = special.polygamma(3, 1.0)
        B1 = c1
        B2 = (c2 + c1 * c1) / 2.0
        B3 = (c3 + 3.0 * c1 * c2 + c1**3) / 6.0
        B4 = (c4 + 4.0 * c1 * c3 + 3.0 * c2 * c2 + 6.0 * c1 * c1 * c2 + c1**4) / 24.0
        return B1, B2, B3, B4

    def dh(self, xi: float) -> float:
        if xi >= 1.0:
            return np.nan
        if abs(xi) < XI_TINY:
            B1, B2, B3, B4 = self._series(xi)
            return B2 + 2.0 * B3 * xi + 3.0 * B4 * xi * xi
        ec = np.exp(self._c(xi))
        return (self._c1(xi) * ec - self.h(xi)) / xi

    def d2h(self, xi: float) -> float:
        if xi >= 1.0:
            return np.nan
        if abs(xi) < XI_TINY:
            B1, B2, B3, B4 = self._series(xi)
            return 2.0 * B3 + 6.0 * B4 * xi
        ec = np.exp(self._c(xi))
        c1 = self._c1(xi)
        c2 = special.polygamma(1, 1.0 - xi)
        return ((c2 + c1 * c1) * ec - 2.0 * self.dh(xi)) / xi
