"""Risk measures of fitted extremal models and their interest parametrizations.

All the scalar summaries used for profiling share one algebraic shape.
With kappa depending only on the shape xi and the horizon,

    GEV-based:  psi = mu + sigma * h(xi),    h = (kappa - 1)/xi
    GP-based:   psi = u  + tau   * h(xi)

so each kind reduces to a choice of h (see kernels.PowerKappa and
kernels.GumbelMeanKappa) plus bookkeeping.  constrain_params inverts the
map for the location (GEV) or scale (GP), which is what the profile
engine optimizes over.

Horizons: T is measured in periods (years); for threshold models the
number of exceedances per period is zeta_u * N_y with zeta_u treated as a
fixed plug-in rate, so the compound horizon is m = zeta_u * T * N_y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.stats as st

from .families import GevParams, GpParams, gev_cdf, gev_quantile
from .kernels import GumbelMeanKappa, PowerKappa

__all__ = [
    "RiskSpec",
    "return_level",
    "tmax_quantile",
    "tmax_mean",
    "pp_tmax_quantile",
    "prob_exceed",
    "gp_tmax_quantile",
    "gp_tmax_mean",
    "gp_return_level",
    "excess_endpoint",
    "risk_value",
    "constrain_params",
    "kappa_fun_for",
    "exceedance_count_probs",
]

GEV_FAMILIES = ("gev", "pp", "rlargest")
GP_FAMILIES = ("gp", "ltrc")

_KINDS = (
    "return_level",
    "tmax_quantile",
    "tmax_mean",
    "prob_exceed",
    "gp_tmax_quantile",
    "pp_tmax_quantile",
    "endpoint",
)


@dataclass(frozen=True)
class RiskSpec:
    """What to infer.  Fields beyond `kind` are read only when relevant.

    T          horizon in periods (years, or block counts for block maxima)
    p          probability, for the quantile kinds
    N_y        observations per period, threshold models
    zeta_u     exceedance rate P(Y > u), fixed plug-in
    u          threshold (original data units)
    z          level whose exceedance probability is wanted (prob_exceed)
    year       covariate value for non-stationary prob_exceed
    """

    kind: str
    T: float = 1.0
    p: float | None = None
    N_y: float | None = None
    zeta_u: float | None = None
    u: float = 0.0
    z: float | None = None
    year: float | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown risk kind {self.kind!r}")
        if self.T <= 0.0:
            raise ValueError("T must be positive")
        if self.kind in ("tmax_quantile", "gp_tmax_quantile", "pp_tmax_quantile"):
            if self.p is None or not (0.0 < self.p < 1.0):
                raise ValueError("quantile kinds need p in (0,1)")
        if self.kind == "prob_exceed" and self.z is None:
            raise ValueError("prob_exceed needs a level z")
        if self.zeta_u is not None and not (0.0 < self.zeta_u <= 1.0):
            raise ValueError("zeta_u must lie in (0,1]")

    def compound_horizon(self) -> float:
        """m = zeta_u * T * N_y, the expected exceedance count over T."""
        if self.zeta_u is None or self.N_y is None:
            raise ValueError("threshold kinds need zeta_u and N_y")
        return self.zeta_u * self.T * self.N_y


# ---------------------------------------------------------------------------
# forward functionals
# ---------------------------------------------------------------------------


def return_level(params: GevParams, T: float) -> float:
    """Level exceeded by the per-period maximum with probability 1/T."""
    if T <= 1.0:
        raise ValueError("return period T must exceed 1")
    return float(gev_quantile(1.0 - 1.0 / T, params))


def tmax_quantile(params: GevParams, T: float, p: float) -> float:
    """p-quantile of the maximum over a horizon of T periods."""
    L = math.log(T) - math.log(-math.log(p))
    return params.mu + params.sigma * PowerKappa(L).h(params.xi)


def pp_tmax_quantile(params: GevParams, T: float, p: float) -> float:
    """Same functional as tmax_quantile; kept as the point-process alias."""
    return tmax_quantile(params, T, p)


def tmax_mean(params: GevParams, T: float) -> float:
    """Expectation of the maximum over T periods; needs xi < 1."""
    if params.xi >= 1.0:
        raise ValueError("tmax_mean is infinite for xi >= 1")
    return params.mu + params.sigma * GumbelMeanKappa(math.log(T)).h(params.xi)


def prob_exceed(params: GevParams, z: float) -> float:
    return float(1.0 - gev_cdf(np.array([z]), params)[0])


def _gp_quantile_L(spec: RiskSpec) -> float:
    # kappa_p = (1 - p^(1/m))^(-xi); 1 - p^(1/m) = -expm1(log p / m)
    m = spec.compound_horizon()
    return -math.log(-math.expm1(math.log(spec.p) / m))


def gp_tmax_quantile(params: GpParams, spec: RiskSpec) -> float:
    """p-quantile of the max of ~m = zeta_u*T*N_y exceedances over u."""
    return spec.u + params.tau * PowerKappa(_gp_quantile_L(spec)).h(params.xi)


def gp_tmax_mean(params: GpParams, spec: RiskSpec) -> float:
    """Expected maximum over the compound horizon, Poisson count approximation."""
    if params.xi >= 1.0:
        raise ValueError("infinite mean for xi >= 1")
    m = spec.compound_horizon()
    return spec.u + params.tau * GumbelMeanKappa(math.log(m)).h(params.xi)


def gp_return_level(params: GpParams, spec: RiskSpec) -> float:
    """Level exceeded once per horizon on average: kappa = m^xi."""
    m = spec.compound_horizon()
    if m <= 1.0:
        raise ValueError("compound horizon must exceed one exceedance")
    return spec.u + params.tau * PowerKappa(math.log(m)).h(params.xi)


def excess_endpoint(params: GpParams, u: float = 0.0) -> float:
    """Finite upper endpoint u - tau/xi; requires xi < 0."""
    if params.xi >= 0.0:
        raise ValueError("upper endpoint is finite only for xi < 0")
    return u - params.tau / params.xi


def exceedance_count_probs(T: int, l_max: int) -> np.ndarray:
    """P(l exceedances of the T-period return level in T periods), l=0..l_max.

    Exact Binomial(T, 1/T); converges to Poisson(1) as T grows.
    """
    if T < 1 or int(T) != T:
        raise ValueError("T must be a positive integer")
    return st.binom.pmf(np.arange(l_max + 1), int(T), 1.0 / T)


# ---------------------------------------------------------------------------
# interest parametrization
# ---------------------------------------------------------------------------


def kappa_fun_for(spec: RiskSpec, family: str):
    """h(xi) object such that psi = anchor + scale*h(xi), or None (endpoint)."""
    if family in GEV_FAMILIES:
        if spec.kind == "return_level":
            return PowerKappa(-math.log(-math.log1p(-1.0 / spec.T)))
        if spec.kind in ("tmax_quantile", "pp_tmax_quantile"):
            return PowerKappa(math.log(spec.T) - math.log(-math.log(spec.p)))
        if spec.kind == "tmax_mean":
            return GumbelMeanKappa(math.log(spec.T))
        if spec.kind == "prob_exceed":
            # anchor is the level z; L depends on psi, handled by the caller
            return None
        raise ValueError(f"kind {spec.kind!r} not defined for family {family!r}")
    if family in GP_FAMILIES:
        if spec.kind in ("tmax_quantile", "gp_tmax_quantile"):
            return PowerKappa(_gp_quantile_L(spec))
        if spec.kind == "tmax_mean":
            return GumbelMeanKappa(math.log(spec.compound_horizon()))
        if spec.kind == "return_level":
            return PowerKappa(math.log(spec.compound_horizon()))
        if spec.kind == "endpoint":
            return None
        raise ValueError(f"kind {spec.kind!r} not defined for family {family!r}")
    raise ValueError(f"unknown family {family!r}")


def prob_exceed_L(psi: float) -> float:
    """L(psi) = -log(-log(1-psi)) for the exceedance-probability kind."""
    if not (0.0 < psi < 1.0):
        raise ValueError("exceedance probability must lie in (0,1)")
    return -math.log(-math.log1p(-psi))


def risk_value(params, spec: RiskSpec, family: str = "gev") -> float:
    """Unified forward dispatch used by fits, the simulator and the CLI."""
    if family in GEV_FAMILIES:
        if spec.kind == "return_level":
            return return_level(params, spec.T)
        if spec.kind in ("tmax_quantile", "pp_tmax_quantile"):
            return tmax_quantile(params, spec.T, spec.p)
        if spec.kind == "tmax_mean":
            return tmax_mean(params, spec.T)
        if spec.kind == "prob_exceed":
            return prob_exceed(params, spec.z)
    if family in GP_FAMILIES:
        if spec.kind in ("tmax_quantile", "gp_tmax_quantile"):
            return gp_tmax_quantile(params, spec)
        if spec.kind == "tmax_mean":
            return gp_tmax_mean(params, spec)
        if spec.kind == "return_level":
            return gp_return_level(params, spec)
        if spec.kind == "endpoint":
            return excess_endpoint(params, spec.u)
    raise ValueError(f"no functional for kind {spec.kind!r} under family {family!r}")


def constrain_params(psi: float, lam, spec: RiskSpec, family: str = "gev"):
    """Native parameters with the interest psi pinned; lam is the nuisance.

    GEV kinds: lam = (sigma, xi), solves for mu.
    GP kinds:  lam = (xi,),       solves for tau.
    Raises ValueError when (psi, lam) leaves the native parameter space.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if family in GEV_FAMILIES:
        sigma, xi = float(lam[0]), float(lam[1])
        if sigma <= 0.0:
            raise ValueError("sigma must be positive")
        if spec.kind == "prob_exceed":
            h = PowerKappa(prob_exceed_L(psi)).h(xi)
            return GevParams(spec.z - sigma * h, sigma, xi)
        kf = kappa_fun_for(spec, family)
        h = kf.h(xi)
        if not np.isfinite(h):
            raise ValueError("infeasible shape for this risk kind")
        return GevParams(psi - sigma * h, sigma, xi)
    if family in GP_FAMILIES:
        xi = float(lam[0])
        if spec.kind == "endpoint":
            if xi >= 0.0 or psi <= spec.u:
                raise ValueError("endpoint kind needs xi < 0 and psi above u")
            return GpParams(-(psi - spec.u) * xi, xi)
        kf = kappa_fun_for(spec, family)
        h = kf.h(xi)
        if not np.isfinite(h) or h <= 0.0 or psi <= spec.u:
            raise ValueError("infeasible (psi, xi) for this risk kind")
        return GpParams((psi - spec.u) / h, xi)
    raise ValueError(f"unknown family {family!r}")
