"""Generalized extreme-value and generalized Pareto building blocks.

Parameter containers, distribution functions, analytic log-likelihood
bundles (value, score, observed information, per-observation scores) and
the two stability maps (block-size rescaling for the GEV, threshold
translation for the GP).

Conventions
-----------
* GEV(mu, sigma, xi):  G(y) = exp{-(1 + xi (y-mu)/sigma)_+^(-1/xi)},
  Gumbel at xi = 0.
* GP(tau, xi) models excesses y >= 0 over a threshold:
  H(y) = 1 - (1 + xi y/tau)_+^(-1/xi), exponential at xi = 0.
* Out-of-support evaluations return value = -inf with in_support = False
  instead of raising; optimizers probe infeasible points routinely.
* Scores and information switch to series in xi below kernels.XI_TINY, so
  they stay accurate through xi = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import EULER_GAMMA, boxcox_log, shape_kernels

__all__ = [
    "GevParams",
    "GpParams",
    "LoglikBundle",
    "gev_logpdf",
    "gev_cdf",
    "gev_quantile",
    "gev_mean",
    "gev_rvs",
    "gev_support",
    "gev_loglik",
    "gev_obs_terms",
    "gp_logpdf",
    "gp_cdf",
    "gp_quantile",
    "gp_rvs",
    "gp_loglik",
    "gp_obs_terms",
    "rescale_gev",
    "gp_threshold_shift",
]

# shape at or below which the usual sqrt-n regularity of the MLE is lost
XI_REGULARITY_EDGE = -0.5


@dataclass(frozen=True)
class GevParams:
    mu: float
    sigma: float
    xi: float

    def __post_init__(self):
        if not (self.sigma > 0.0):
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    def as_array(self) -> np.ndarray:
        return np.array([self.mu, self.sigma, self.xi], dtype=float)


@dataclass(frozen=True)
class GpParams:
    tau: float
    xi: float

    def __post_init__(self):
        if not (self.tau > 0.0):
            raise ValueError(f"tau must be positive, got {self.tau}")

    def as_array(self) -> np.ndarray:
        return np.array([self.tau, self.xi], dtype=float)


@dataclass
class LoglikBundle:
    """Log likelihood with analytic derivatives.

    score is exactly per_obs_scores.sum(axis=0) (same arithmetic path);
    obs_info is the negative Hessian.  When in_support is False the value
    is -inf and the derivative fields are NaN.
    """

    value: float
    score: np.ndarray
    obs_info: np.ndarray
    per_obs_scores: np.ndarray
    in_support: bool = True

    @classmethod
    def invalid(cls, n: int, p: int) -> "LoglikBundle":
        return cls(
            value=-np.inf,
            score=np.full(p, np.nan),
            obs_info=np.full((p, p), np.nan),
            per_obs_scores=np.full((n, p), np.nan),
            in_support=False,
        )


# ---------------------------------------------------------------------------
# distribution functions
# ---------------------------------------------------------------------------


def _hxi(xi: float, L):
    """(exp(xi*L) - 1)/xi, -> L at xi = 0; L may be an array."""
    L = np.asarray(L, dtype=float)
    if xi == 0.0:
        return L
    t = xi * L
    # series where xi*L could underflow (subnormal xi) or cancel
    with np.errstate(over="ignore"):
        return np.where(np.abs(t) < 1.0e-8, L * (1.0 + 0.5 * t), np.expm1(t) / xi)


def gev_support(params: GevParams) -> tuple[float, float]:
    if params.xi > 0.0:
        return (params.mu - params.sigma / params.xi, np.inf)
    if params.xi < 0.0:
        return (-np.inf, params.mu - params.sigma / params.xi)
    return (-np.inf, np.inf)


def gev_cdf(y, params: GevParams):
    z = (np.asarray(y, dtype=float) - params.mu) / params.sigma
    xi = params.xi
    A = boxcox_log(z, xi)  # nan marks out-of-support points
    body = np.exp(-np.exp(-np.where(np.isnan(A), 0.0, A)))
    return np.where(np.isnan(A), 0.0 if xi > 0.0 else 1.0, body)


def gev_logpdf(y, params: GevParams):
    z = (np.asarray(y, dtype=float) - params.mu) / params.sigma
    k = shape_kernels(z, params.xi)
    E = np.exp(-k.A)
    out = -np.log(params.sigma) - k.logw - k.A - E
    return np.where(k.ok, out, -np.inf)


def gev_quantile(p, params: GevParams):
    p = np.asarray(p, dtype=float)
    L = -np.log(-np.log(p))
    return params.mu + params.sigma * _hxi(params.xi, L)


def gev_mean(params: GevParams) -> float:
    from scipy.special import gamma

    xi = params.xi
    if xi >= 1.0:
        return np.inf
    if xi == 0.0:
        return params.mu + params.sigma * EULER_GAMMA
    return params.mu + params.sigma * (gamma(1.0 - xi) - 1.0) / xi


def gev_rvs(params: GevParams, size, rng: np.random.Generator):
    u = rng.uniform(size=size)
    return gev_quantile(u, params)


def gp_cdf(y, params: GpParams):
    y = np.asarray(y, dtype=float)
    z = y / params.tau
    A = boxcox_log(z, params.xi)  # nan only above a finite upper endpoint
    out = -np.expm1(-np.where(np.isnan(A), np.inf, A))
    return np.where(y <= 0.0, 0.0, out)


def gp_logpdf(y, params: GpParams):
    y = np.asarray(y, dtype=float)
    z = y / params.tau
    k = shape_kernels(z, params.xi)
    out = -np.log(params.tau) - k.logw - k.A
    ok = k.ok & (y >= 0.0)
    return np.where(ok, out, -np.inf)


def gp_quantile(p, params: GpParams):
    p = np.asarray(p, dtype=float)
    L = -np.log1p(-p)
    return params.tau * _hxi(params.xi, L)


def gp_rvs(params: GpParams, size, rng: np.random.Generator):
    u = rng.uniform(size=size)
    return gp_quantile(u, params)


# ---------------------------------------------------------------------------
# log-likelihood bundles
# ---------------------------------------------------------------------------


def gev_loglik(y, params: GevParams) -> LoglikBundle:
    """Analytic GEV log likelihood for an iid sample."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    n = y.size
    mu, sigma, xi = params.mu, params.sigma, params.xi
    z = (y - mu) / sigma
    k = shape_kernels(z, xi)
    if not np.all(k.ok):
        return LoglikBundle.invalid(n, 3)

    E = np.exp(-k.A)
    one_mE = 1.0 - E
    value = float(np.sum(-np.log(sigma) - k.logw - k.A - E))

    T_z = -xi / k.w - k.A_z * one_mE
    T_x = -z / k.w - k.A_x * one_mE
    T_zz = (xi / k.w) ** 2 - k.A_zz * one_mE - E * k.A_z**2
    T_zx = -1.0 / k.w**2 - k.A_zx * one_mE - E * k.A_z * k.A_x
    T_xx = (z / k.w) ** 2 - k.A_xx * one_mE - E * k.A_x**2

    per_obs = np.empty((n, 3))
    per_obs[:, 0] = -T_z / sigma
    per_obs[:, 1] = -1.0 / sigma - T_z * z / sigma
    per_obs[:, 2] = T_x
    score = per_obs.sum(axis=0)

    H = np.empty((3, 3))
    H[0, 0] = np.sum(T_zz) / sigma**2
    H[0, 1] = H[1, 0] = np.sum(T_zz * z + T_z) / sigma**2
    H[1, 1] = np.sum(1.0 + T_zz * z**2 + 2.0 * T_z * z) / sigma**2
    H[0, 2] = H[2, 0] = -np.sum(T_zx) / sigma
    H[1, 2] = H[2, 1] = -np.sum(T_zx * z) / sigma
    H[2, 2] = np.sum(T_xx)

    return LoglikBundle(value=value, score=score, obs_info=-H, per_obs_scores=per_obs)


def gev_obs_terms(y, params: GevParams) -> dict:
    """Per-observation pieces used by the tangent exponential model.

    Returns dlogf_dy (n,), d2logf_dy_dtheta (n,3), cdf_grad (n,3) and pdf
    (n,) in the native (mu, sigma, xi) order.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    mu, sigma, xi = params.mu, params.sigma, params.xi
    z = (y - mu) / sigma
    k = shape_kernels(z, xi)
    E = np.exp(-k.A)
    one_mE = 1.0 - E

    T_z = -xi / k.w - k.A_z * one_mE
    T_zz = (xi / k.w) ** 2 - k.A_zz * one_mE - E * k.A_z**2
    T_zx = -1.0 / k.w**2 - k.A_zx * one_mE - E * k.A_z * k.A_x

    dlogf_dy = T_z / sigma
    d2 = np.empty((y.size, 3))
    d2[:, 0] = -T_zz / sigma**2
    d2[:, 1] = -(T_zz * z + T_z) / sigma**2
    d2[:, 2] = T_zx / sigma

    F = np.exp(-E)
    pdf = F * E * k.A_z / sigma
    cdf_grad = np.empty((y.size, 3))
    cdf_grad[:, 0] = F * E * k.A_z * (-1.0 / sigma)
    cdf_grad[:, 1] = F * E * k.A_z * (-z / sigma)
    cdf_grad[:, 2] = F * E * k.A_x

    return {"dlogf_dy": dlogf_dy, "d2logf_dy_dtheta": d2, "cdf_grad": cdf_grad, "pdf": pdf, "ok": k.ok}


def gp_loglik(y, params: GpParams) -> LoglikBundle:
    """Analytic GP log likelihood for iid excesses y >= 0."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    n = y.size
    tau, xi = params.tau, params.xi
    z = y / tau
    k = shape_kernels(z, xi)
    if not (np.all(k.ok) and np.all(y >= 0.0)):
        return LoglikBundle.invalid(n, 2)

    value = float(np.sum(-np.log(tau) - k.logw - k.A))

    T_z = -xi / k.w - k.A_z
    T_x = -z / k.w - k.A_x
    T_zz = (xi / k.w) ** 2 - k.A_zz
    T_zx = -1.0 / k.w**2 - k.A_zx
    T_xx = (z / k.w) ** 2 - k.A_xx

    per_obs = np.empty((n, 2))
    per_obs[:, 0] = -1.0 / tau - T_z * z / tau
    per_obs[:, 1] = T_x
    score = per_obs.sum(axis=0)

    H = np.empty((2, 2))
    H[0, 0] = np.sum(1.0 + T_zz * z**2 + 2.0 * T_z * z) / tau**2
    H[0, 1] = H[1, 0] = -np.sum(T_zx * z) / tau
    H[1, 1] = np.sum(T_xx)

    return LoglikBundle(value=value, score=score, obs_info=-H, per_obs_scores=per_obs)


def gp_obs_terms(y, params: GpParams) -> dict:
    """Tangent-model pieces for iid GP excesses, native (tau, xi) order."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    tau, xi = params.tau, params.xi
    z = y / tau
    k = shape_kernels(z, xi)

    T_z = -xi / k.w - k.A_z
    T_zz = (xi / k.w) ** 2 - k.A_zz
    T_zx = -1.0 / k.w**2 - k.A_zx

    dlogf_dy = T_z / tau
    d2 = np.empty((y.size, 2))
    d2[:, 0] = -(T_zz * z + T_z) / tau**2
    d2[:, 1] = T_zx / tau

    S = np.exp(-k.A)
    pdf = S * k.A_z / tau
    cdf_grad = np.empty((y.size, 2))
    cdf_grad[:, 0] = S * k.A_z * (-z / tau)
    cdf_grad[:, 1] = S * k.A_x

    return {"dlogf_dy": dlogf_dy, "d2logf_dy_dtheta": d2, "cdf_grad": cdf_grad, "pdf": pdf, "ok": k.ok}


# ---------------------------------------------------------------------------
# stability maps
# ---------------------------------------------------------------------------


def rescale_gev(params: GevParams, T: float) -> GevParams:
    """Distribution of the maximum of T independent GEV(params) variables.

    Max-stability: mu_T = mu + sigma (T^xi - 1)/xi, sigma_T = sigma T^xi.
    T may be any positive real (fractional powers of the cdf).
    """
    if T <= 0.0:
        raise ValueError("T must be positive")
    logT = np.log(T)
    mu_T = params.mu + params.sigma * _hxi(params.xi, logT)
    sigma_T = params.sigma * np.exp(params.xi * logT)
    return GevParams(mu_T, sigma_T, params.xi)


def gp_threshold_shift(params: GpParams, du: float) -> GpParams:
    """GP parameters for excesses over a threshold raised by du >= 0.

    Threshold stability: tau_u' = tau + xi du, same shape.
    """
    tau_new = params.tau + params.xi * du
    if tau_new <= 0.0:
        raise ValueError(f"shifted threshold leaves the support: tau + xi*du = {tau_new}")
    return GpParams(tau_new, params.xi)
