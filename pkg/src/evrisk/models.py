"""Engine-coordinate models for profile and tangent-model inference.

A model couples a data vector with a risk functional and exposes the
likelihood in *engine coordinates* x = (eta, lam), where eta is a (possibly
transformed) interest coordinate and lam collects the nuisance parameters.
Everything the inference engine needs lives behind a small protocol:

    p, n, lam_names          dimensions and labels
    nat(x)                   native parameters, or None when infeasible
    bundle(x)                LoglikBundle in engine coordinates
    tem_terms(x)             (dlogf_dy, G_eng) with G_eng[i] = d2 l_i/dy_i dx
    V(x_hat)                 n x p matrix of sample-space directions at the MLE
    eng_from_nat(params)     engine coordinates of a native fit
    feasible_interval()      open interval of admissible eta values

The interest coordinate is the risk value itself by default; passing
transform="log" reparametrizes eta = log psi, which the correction terms
must leave invariant (checked in tests).  All derivative chains here are
analytic; finite differences appear only in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .families import (
    GevParams,
    GpParams,
    LoglikBundle,
    gev_loglik,
    gev_obs_terms,
    gp_loglik,
    gp_obs_terms,
)
from .kernels import PowerKappa, shape_kernels
from .risk import (
    GEV_FAMILIES,
    GP_FAMILIES,
    RiskSpec,
    constrain_params,
    kappa_fun_for,
    risk_value,
)


@dataclass(frozen=True)
class ModelSpec:
    """Family + risk functional + the fixed constants a family needs."""

    family: str
    risk: RiskSpec
    u: float = 0.0          # threshold (gp, ltrc, pp)
    s: Optional[float] = None   # lower barrier for conditioned point processes
    t: Optional[float] = None   # observation span in years (pp)
    trend: bool = False     # linear location trend (rlargest)

    def __post_init__(self):
        known = ("gev", "gp", "rlargest", "pp_std", "pp_fc", "pp_pc", "ltrc_gp")
        if self.family not in known:
            raise ValueError(f"unknown family {self.family!r}")


class InterestTransform(NamedTuple):
    """Monotone map eta = fwd(psi); inv and its first two derivatives."""

    fwd: Callable[[float], float]
    inv: Callable[[float], float]
    d_inv: Callable[[float], float]
    d2_inv: Callable[[float], float]


LOG_INTEREST = InterestTransform(math.log, math.exp, math.exp, math.exp)
IDENTITY_INTEREST = InterestTransform(
    lambda p: p, lambda e: e, lambda e: 1.0, lambda e: 0.0
)


def resolve_transform(transform) -> InterestTransform:
    if transform is None or transform == "identity":
        return IDENTITY_INTEREST
    if transform == "log":
        return LOG_INTEREST
    if isinstance(transform, InterestTransform):
        return transform
    raise ValueError(f"unknown interest transform {transform!r}")


# ---------------------------------------------------------------------------
# reparametrization maps: engine coordinates -> native parameters


class GevRiskMap:
    """(eta, sigma, xi) -> (mu, sigma, xi) with the risk value pinned.

    mu = psi - sigma*h(xi) for fixed-horizon kinds; the exceedance
    probability kind anchors at the level z instead, with the horizon
    constant depending on psi through L(psi) = -log(-log(1-psi)).
    """

    lam_names = ("sigma", "xi")

    def __init__(self, spec: RiskSpec, family: str = "gev", transform=None):
        if family not in GEV_FAMILIES:
            raise ValueError("GevRiskMap needs a block-maxima family")
        self.spec = spec
        self.family = family
        self.tr = resolve_transform(transform)
        self.kappa = kappa_fun_for(spec, family)

    def nat(self, x) -> Optional[GevParams]:
        psi = self.tr.inv(float(x[0]))
        try:
            return constrain_params(psi, x[1:], self.spec, self.family)
        except (ValueError, OverflowError):
            return None

    def jac_hess(self, x):
        eta, sigma, xi = float(x[0]), float(x[1]), float(x[2])
        psi = self.tr.inv(eta)
        d1, d2 = self.tr.d_inv(eta), self.tr.d2_inv(eta)
        J = np.eye(3)
        H = np.zeros((3, 3, 3))
        if self.spec.kind == "prob_exceed":
            # mu = z - sigma*h(xi; L(psi)); a = -log(1-psi), L = -log a
            a = -math.log1p(-psi)
            ap = 1.0 / (1.0 - psi)
            L = -math.log(a)
            Lp = -ap / a
            Lpp = -ap * ap / a + (ap / a) ** 2
            kf = PowerKappa(L)
            h, h_x, h_xx = kf.h(xi), kf.dh(xi), kf.d2h(xi)
            eL = math.exp(xi * L)          # dh/dL
            h_LL = xi * eL
            h_Lx = L * eL
            mu_p = -sigma * eL * Lp
            mu_pp = -sigma * (h_LL * Lp * Lp + eL * Lpp)
            mu_ps = -eL * Lp
            mu_px = -sigma * h_Lx * Lp
        else:
            h, h_x, h_xx = self.kappa.h(xi), self.kappa.dh(xi), self.kappa.d2h(xi)
            mu_p, mu_pp, mu_ps, mu_px = 1.0, 0.0, 0.0, 0.0
        J[0, 0] = mu_p * d1
        J[0, 1] = -h
        J[0, 2] = -sigma * h_x
        H[0, 0, 0] = mu_pp * d1 * d1 + mu_p * d2
        H[0, 0, 1] = H[0, 1, 0] = mu_ps * d1
        H[0, 0, 2] = H[0, 2, 0] = mu_px * d1
        H[0, 1, 2] = H[0, 2, 1] = -h_x
        H[0, 2, 2] = -sigma * h_xx
        return J, H

    def eng_from_nat(self, params: GevParams) -> np.ndarray:
        psi = risk_value(params, self.spec, self.family)
        return np.array([self.tr.fwd(psi), params.sigma, params.xi])


class GpRiskMap:
    """(eta, xi) -> (tau, xi): tau = (psi-u)/h(xi), or -(psi-u)*xi (endpoint)."""

    lam_names = ("xi",)

    def __init__(self, spec: RiskSpec, family: str = "gp", transform=None):
        if family not in GP_FAMILIES:
            raise ValueError("GpRiskMap needs a threshold family")
        self.spec = spec
        self.family = family
        self.tr = resolve_transform(transform)
        self.kappa = kappa_fun_for(spec, family)

    def nat(self, x) -> Optional[GpParams]:
        psi = self.tr.inv(float(x[0]))
        try:
            return constrain_params(psi, x[1:], self.spec, self.family)
        except (ValueError, OverflowError):
            return None

    def jac_hess(self, x):
        eta, xi = float(x[0]), float(x[1])
        psi = self.tr.inv(eta)
        d1, d2 = self.tr.d_inv(eta), self.tr.d2_inv(eta)
        du = psi - self.spec.u
        J = np.eye(2)
        H = np.zeros((2, 2, 2))
        if self.spec.kind == "endpoint":
            J[0, 0] = -xi * d1
            J[0, 1] = -du
            H[0, 0, 0] = -xi * d2
            H[0, 0, 1] = H[0, 1, 0] = -d1
        else:
            h, h_x, h_xx = self.kappa.h(xi), self.kappa.dh(xi), self.kappa.d2h(xi)
            J[0, 0] = d1 / h
            J[0, 1] = -du * h_x / (h * h)
            H[0, 0, 0] = d2 / h
            H[0, 0, 1] = H[0, 1, 0] = -d1 * h_x / (h * h)
            H[0, 1, 1] = du * (2.0 * h_x * h_x - h * h_xx) / h**3
        return J, H

    def eng_from_nat(self, params: GpParams) -> np.ndarray:
        psi = risk_value(params, self.spec, self.family)
        return np.array([self.tr.fwd(psi), params.xi])


# ---------------------------------------------------------------------------
# engine models


def _map_interval(tr: InterestTransform, lo: float, hi: float):
    """Push interest-space bounds through the transform, guarding log(0)."""

    def _m(v):
        if not np.isfinite(v):
            return v
        if tr is LOG_INTEREST and v <= 0.0:
            return -np.inf
        return tr.fwd(v)

    return _m(lo), _m(hi)


def _eng_bundle(nat_bundle: LoglikBundle, J: np.ndarray, H: np.ndarray) -> LoglikBundle:
    """Push a native-coordinate bundle through theta = t(x).

    score_eng = J' g;  j_eng = J' j J - sum_k g_k H_k  (H_k the Hessian of
    the k-th native coordinate in engine coordinates).
    """
    g = nat_bundle.score
    j_eng = J.T @ nat_bundle.obs_info @ J
    for k in range(len(g)):
        j_eng = j_eng - g[k] * H[k]
    return LoglikBundle(
        value=nat_bundle.value,
        score=J.T @ g,
        obs_info=j_eng,
        per_obs_scores=nat_bundle.per_obs_scores @ J,
        in_support=nat_bundle.in_support,
    )


class GevModel:
    """iid GEV responses with a risk functional as interest parameter."""

    p = 3

    def __init__(self, y, spec, transform=None):
        self.y = np.atleast_1d(np.asarray(y, dtype=float))
        self.n = self.y.size
        risk = spec.risk if isinstance(spec, ModelSpec) else spec
        self.spec = risk
        self.map = GevRiskMap(risk, "gev", transform)
        self.lam_names = self.map.lam_names

    def nat(self, x):
        return self.map.nat(x)

    def bundle(self, x) -> LoglikBundle:
        params = self.nat(x)
        if params is None:
            return LoglikBundle.invalid(self.n, self.p)
        nb = gev_loglik(self.y, params)
        if not nb.in_support:
            return LoglikBundle.invalid(self.n, self.p)
        J, H = self.map.jac_hess(x)
        return _eng_bundle(nb, J, H)

    def tem_terms(self, x):
        params = self.nat(x)
        if params is None:
            raise ValueError("infeasible engine point in tem_terms")
        ot = gev_obs_terms(self.y, params)
        J, _ = self.map.jac_hess(x)
        return ot["dlogf_dy"], ot["d2logf_dy_dtheta"] @ J

    def V(self, x_hat) -> np.ndarray:
        params = self.nat(x_hat)
        z = (self.y - params.mu) / params.sigma
        k = shape_kernels(z, params.xi)
        V_nat = np.column_stack(
            [np.ones(self.n), z, -params.sigma * k.w * k.A_x]
        )
        J, _ = self.map.jac_hess(x_hat)
        return V_nat @ J

    def phi(self, x, V) -> np.ndarray:
        dlogf_dy, _ = self.tem_terms(x)
        return V.T @ dlogf_dy

    def dphi(self, x, V) -> np.ndarray:
        _, G_eng = self.tem_terms(x)
        return V.T @ G_eng

    def eng_from_nat(self, params) -> np.ndarray:
        return self.map.eng_from_nat(params)

    def feasible_interval(self):
        if self.spec.kind == "prob_exceed":
            lo, hi = 0.0, 1.0
        else:
            lo, hi = -np.inf, np.inf
        return _map_interval(self.map.tr, lo, hi)


class GpModel:
    """iid GP excesses over a known threshold, risk value as interest."""

    p = 2

    def __init__(self, y, spec, transform=None):
        self.y = np.atleast_1d(np.asarray(y, dtype=float))
        self.n = self.y.size
        risk = spec.risk if isinstance(spec, ModelSpec) else spec
        self.spec = risk
        self.map = GpRiskMap(risk, "gp", transform)
        self.lam_names = self.map.lam_names

    def nat(self, x):
        return self.map.nat(x)

    def bundle(self, x) -> LoglikBundle:
        params = self.nat(x)
        if params is None:
            return LoglikBundle.invalid(self.n, self.p)
        nb = gp_loglik(self.y, params)
        if not nb.in_support:
            return LoglikBundle.invalid(self.n, self.p)
        J, H = self.map.jac_hess(x)
        return _eng_bundle(nb, J, H)

    def tem_terms(self, x):
        params = self.nat(x)
        if params is None:
            raise ValueError("infeasible engine point in tem_terms")
        ot = gp_obs_terms(self.y, params)
        J, _ = self.map.jac_hess(x)
        return ot["dlogf_dy"], ot["d2logf_dy_dtheta"] @ J

    def V(self, x_hat) -> np.ndarray:
        params = self.nat(x_hat)
        z = self.y / params.tau
        k = shape_kernels(z, params.xi)
        V_nat = np.column_stack([z, -params.tau * k.w * k.A_x])
        J, _ = self.map.jac_hess(x_hat)
        return V_nat @ J

    def phi(self, x, V) -> np.ndarray:
        dlogf_dy, _ = self.tem_terms(x)
        return V.T @ dlogf_dy

    def dphi(self, x, V) -> np.ndarray:
        _, G_eng = self.tem_terms(x)
        return V.T @ G_eng

    def eng_from_nat(self, params) -> np.ndarray:
        return self.map.eng_from_nat(params)

    def feasible_interval(self):
        u = self.spec.u
        if self.spec.kind == "endpoint":
            lo = u + float(np.max(self.y))
        else:
            lo = u
        return _map_interval(self.map.tr, lo, np.inf)


class ExpMeanModel:
    """One-parameter exponential with mean psi; the no-nuisance test bed.

    The canonical parameter reduces to phi = -n/psi, so the tangent-model
    pivot has a closed form against which the generic engine is checked.
    """

    p = 1
    lam_names = ()

    def __init__(self, y, transform=None):
        self.y = np.atleast_1d(np.asarray(y, dtype=float))
        if np.any(self.y <= 0.0):
            raise ValueError("exponential data must be positive")
        self.n = self.y.size
        self.tr = resolve_transform(transform)
        self._S = float(np.sum(self.y))

    def nat(self, x):
        psi = self.tr.inv(float(x[0]))
        return psi if psi > 0.0 else None

    def bundle(self, x) -> LoglikBundle:
        psi = self.nat(x)
        if psi is None or not np.isfinite(psi):
            return LoglikBundle.invalid(self.n, 1)
        n, S, y = self.n, self._S, self.y
        value = -n * math.log(psi) - S / psi
        g_nat = -n / psi + S / psi**2
        h_nat = n / psi**2 - 2.0 * S / psi**3
        d1, d2 = self.tr.d_inv(float(x[0])), self.tr.d2_inv(float(x[0]))
        score = np.array([g_nat * d1])
        j = np.array([[-(h_nat * d1 * d1 + g_nat * d2)]])
        per_obs = ((-1.0 / psi + y / psi**2) * d1)[:, None]
        return LoglikBundle(value, score, j, per_obs, True)

    def tem_terms(self, x):
        psi = self.nat(x)
        d1 = self.tr.d_inv(float(x[0]))
        dlogf_dy = np.full(self.n, -1.0 / psi)
        G_eng = np.full((self.n, 1), d1 / psi**2)
        return dlogf_dy, G_eng

    def V(self, x_hat) -> np.ndarray:
        psi = self.nat(x_hat)
        d1 = self.tr.d_inv(float(x_hat[0]))
        return (self.y / psi * d1)[:, None]

    def phi(self, x, V) -> np.ndarray:
        dlogf_dy, _ = self.tem_terms(x)
        return V.T @ dlogf_dy

    def dphi(self, x, V) -> np.ndarray:
        _, G_eng = self.tem_terms(x)
        return V.T @ G_eng

    def eng_from_nat(self, psi) -> np.ndarray:
        return np.array([self.tr.fwd(float(psi))])

    def feasible_interval(self):
        if self.tr is LOG_INTEREST:
            return -np.inf, np.inf
        return 0.0, np.inf


def build_model(y, spec: ModelSpec, transform=None):
    """Engine model for the iid families; other families ship their own."""
    if spec.family == "gev":
        return GevModel(y, spec, transform)
    if spec.family == "gp":
        return GpModel(y, spec, transform)
    raise ValueError(f"no generic engine model for family {spec.family!r}")
