"""Poisson-process likelihoods for extremes observed under a stopping rule.

Events arrive at unit rate in time with size measure
Lambda(y) = {1 + xi (y - mu) / sigma}_+^(-1/xi), so the expected number of
events of size above y in t years is t * Lambda(y) and an annual maximum
has distribution function exp{-Lambda(y)}.  Observation stops at the first
event above a barrier s > u (or at t_max, whichever comes first); three
likelihoods for the resulting sample are provided:

    std   the plain process likelihood with exposure -t*Lambda(u), which
          ignores that stopping selected the sample;
    fc    event sizes conditioned on the stopping time and the event
          count: right-truncated densities on (u, s) for the sub-barrier
          sizes plus a left-truncated terminal size above s;
    pc    as fc but with the right truncation of the sub-barrier sizes
          ignored (each size is only conditioned on exceeding u).

They satisfy  std = fc + log P(N_t = n, T = t) + log n!  exactly, which is
the module's main internal consistency check.  Independent block maxima
(years with only an annual summary) add a GEV component to any of the
three.  The canonical parameter of the tangent exponential model for the
std likelihood is the integral of the intensity gradient, frozen at the
MLE, against log intensity; an event-sum approximation with the same
asymptotic accuracy is used for large samples.  fc and pc get the usual
iid construction with truncated-distribution pivots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from .families import GevParams, LoglikBundle, gev_loglik, gev_obs_terms, gev_rvs
from .fit import (
    XI_LOWER,
    XI_NONREGULAR,
    FitResult,
    _cov_and_se,
    _nelder_warmup,
    fit_gev,
    fit_gp,
    newton_maximize,
)
from .kernels import shape_kernels
from .models import GevRiskMap, ModelSpec, _eng_bundle, _map_interval

_PP_KINDS = ("std", "fc", "pc")


@dataclass(frozen=True)
class PpData:
    """Stopped-process sample: exceedances of u over t years, ended by the
    first value above s when the stop occurred inside the record."""

    t: float
    u: float
    s: float
    exceedances: np.ndarray
    terminal: Optional[float] = None
    maxima: Optional[np.ndarray] = None

    def __post_init__(self):
        if not (self.t > 0.0):
            raise ValueError("observation span t must be positive")
        if not (self.s > self.u):
            raise ValueError("barrier s must exceed the threshold u")
        y = np.atleast_1d(np.asarray(self.exceedances, dtype=float))
        if y.size and not (np.all(y > self.u) and np.all(y < self.s)):
            raise ValueError("exceedances must lie strictly between u and s")
        object.__setattr__(self, "exceedances", y)
        if self.terminal is not None and not (self.terminal > self.s):
            raise ValueError("terminal value must exceed the barrier")
        if self.maxima is not None:
            m = np.atleast_1d(np.asarray(self.maxima, dtype=float))
            object.__setattr__(self, "maxima", m)

    @property
    def n(self) -> int:
        return self.exceedances.size

    @property
    def n_maxima(self) -> int:
        return 0 if self.maxima is None else self.maxima.size


# ---------------------------------------------------------------------------
# measure, intensity and their parameter derivatives


def pp_lambda(y, params: GevParams):
    """Expected exceedances of y per unit time; saturates outside support."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    k = shape_kernels((y - params.mu) / params.sigma, params.xi)
    with np.errstate(over="ignore"):
        lam = np.exp(-k.A)
    return np.where(k.ok, lam, np.inf if params.xi > 0.0 else 0.0)


def pp_intensity(y, params: GevParams):
    """Size density of the event measure, -dLambda/dy; zero beyond endpoint."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    k = shape_kernels((y - params.mu) / params.sigma, params.xi)
    with np.errstate(over="ignore"):
        out = np.exp(-k.A) * k.A_z / params.sigma
    return np.where(k.ok, out, 0.0)


def _lam_inv(v, params: GevParams):
    """Size y at which the measure equals v: the inverse of pp_lambda."""
    v = np.asarray(v, dtype=float)
    if abs(params.xi) < 1e-12:
        grow = -np.log(v)
    else:
        grow = np.expm1(-params.xi * np.log(v)) / params.xi
    return params.mu + params.sigma * grow


class _Point:
    """Measure, log intensity and all parameter derivatives at given sizes.

    T_z and T_x below are the z- and xi-derivatives of the log intensity
    -log sigma - log w - A, assembled from the shared shape kernels so the
    xi -> 0 limit is seamless.
    """

    def __init__(self, y, params: GevParams):
        self.y = np.atleast_1d(np.asarray(y, dtype=float))
        sigma, xi = params.sigma, params.xi
        self.z = z = (self.y - params.mu) / sigma
        self.k = k = shape_kernels(z, xi)
        self.ok = bool(np.all(k.ok))
        if not self.ok:
            return
        with np.errstate(over="ignore", invalid="ignore"):
            self._fill(params, z, k)

    def _fill(self, params: GevParams, z, k):
        sigma, xi = params.sigma, params.xi
        self.lam = np.exp(-k.A)
        # dLambda/dtheta = -Lambda * dA/dtheta, plus the theta Hessian of A
        a_th = np.column_stack([-k.A_z / sigma, -z * k.A_z / sigma, k.A_x])
        a_hess = np.empty((self.y.size, 3, 3))
        a_hess[:, 0, 0] = k.A_zz / sigma**2
        a_hess[:, 0, 1] = a_hess[:, 1, 0] = (k.A_zz * z + k.A_z) / sigma**2
        a_hess[:, 0, 2] = a_hess[:, 2, 0] = -k.A_zx / sigma
        a_hess[:, 1, 1] = (z**2 * k.A_zz + 2.0 * z * k.A_z) / sigma**2
        a_hess[:, 1, 2] = a_hess[:, 2, 1] = -z * k.A_zx / sigma
        a_hess[:, 2, 2] = k.A_xx
        self.a_th = a_th
        self.a_hess = a_hess
        self.lam_th = -self.lam[:, None] * a_th
        self.lam_hess = self.lam[:, None, None] * (
            a_th[:, :, None] * a_th[:, None, :] - a_hess
        )
        T_z = -xi / k.w - k.A_z
        T_x = -z / k.w - k.A_x
        T_zz = (xi / k.w) ** 2 - k.A_zz
        T_zx = -1.0 / k.w**2 - k.A_zx
        T_xx = (z / k.w) ** 2 - k.A_xx
        self.logint = -math.log(sigma) - k.logw - k.A
        self.intensity = self.lam * k.A_z / sigma
        self.score = np.column_stack(
            [-T_z / sigma, -1.0 / sigma - T_z * z / sigma, T_x]
        )
        hess = np.empty((self.y.size, 3, 3))
        hess[:, 0, 0] = T_zz / sigma**2
        hess[:, 0, 1] = hess[:, 1, 0] = (T_zz * z + T_z) / sigma**2
        hess[:, 0, 2] = hess[:, 2, 0] = -T_zx / sigma
        hess[:, 1, 1] = (1.0 + T_zz * z**2 + 2.0 * T_z * z) / sigma**2
        hess[:, 1, 2] = hess[:, 2, 1] = -T_zx * z / sigma
        hess[:, 2, 2] = T_xx
        self.hess = hess
        # sample-space pieces for the tangent model
        self.dlogint_dy = T_z / sigma
        self.G = np.column_stack(
            [-T_zz / sigma**2, -(T_zz * z + T_z) / sigma**2, T_zx / sigma]
        )


class _ZeroMeasure:
    """Stands in for the barrier point when Lambda(s) saturates to zero.

    Only legitimate for xi < 0 with no stop observed: the model then says
    the barrier is unreachable, which still has positive likelihood.
    """

    def __init__(self):
        self.ok = True
        self.lam = np.zeros(1)
        self.lam_th = np.zeros((1, 3))
        self.lam_hess = np.zeros((1, 3, 3))


def _anchor_points(data: PpData, params: GevParams):
    """Kernel bundles at u, s and the observations, or None when infeasible."""
    pts = {
        "u": _Point(np.array([data.u]), params),
        "ev": _Point(data.exceedances, params),
    }
    s_pt = _Point(np.array([data.s]), params)
    if not s_pt.ok:
        if params.xi < 0.0 and data.terminal is None:
            s_pt = _ZeroMeasure()
        else:
            return None
    pts["s"] = s_pt
    if data.terminal is not None:
        pts["term"] = _Point(np.array([data.terminal]), params)
    for v in pts.values():
        if not v.ok:
            return None
    return pts


# ---------------------------------------------------------------------------
# the three likelihoods


def _process_rows(data: PpData, pts, kind: str):
    """Value, per-unit score rows and total Hessian of the process part.

    Rows follow [events..., terminal?, count?].  The count row (std only)
    carries the event-count and stopping-time information so that the row
    sum reproduces the unconditional score exactly; fc drops that term by
    conditioning and pc additionally swaps the truncation constant.
    """
    u, s, ev = pts["u"], pts["s"], pts["ev"]
    term = pts.get("term")
    t, n = data.t, data.n
    with np.errstate(over="ignore", invalid="ignore"):
        D = u.lam[0] - s.lam[0]
        if not np.isfinite(D) or not (D > 0.0):
            return None
        D_th = u.lam_th[0] - s.lam_th[0]
        D_hess = u.lam_hess[0] - s.lam_hess[0]
        return _assemble_rows(data, pts, kind, D, D_th, D_hess)


def _assemble_rows(data, pts, kind, D, D_th, D_hess):
    u, s, ev = pts["u"], pts["s"], pts["ev"]
    term = pts.get("term")
    t, n = data.t, data.n
    rows = []

    if kind == "std":
        value = float(np.sum(ev.logint)) - t * u.lam[0]
        hess = ev.hess.sum(axis=0) - t * u.lam_hess[0]
        count = n * D_th / D - t * D_th - t * s.lam_th[0]
        for i in range(n):
            rows.append(ev.score[i] - D_th / D)
        if term is not None:
            value += term.logint[0]
            hess += term.hess[0]
            rows.append(term.score[0] - s.lam_th[0] / s.lam[0])
            count = count + s.lam_th[0] / s.lam[0]
        rows.append(count)
        return value, rows, hess

    if kind == "fc":
        trunc_val = -math.log(t) - math.log(D)
        trunc_score = -D_th / D
        trunc_hess = -(D_hess / D - np.outer(D_th, D_th) / D**2)
    else:
        # each size only conditioned on exceeding u: log Lambda(u) = -A(u)
        trunc_val = -math.log(t) + float(u.k.A[0])
        trunc_score = u.a_th[0]
        trunc_hess = u.a_hess[0]
    value = float(np.sum(ev.logint)) + n * trunc_val
    hess = ev.hess.sum(axis=0) + n * trunc_hess
    for i in range(n):
        rows.append(ev.score[i] + trunc_score)
    if term is not None:
        # left-truncated above the barrier: log intensity + A(s)
        value += term.logint[0] + float(s.k.A[0])
        hess += term.hess[0] + s.a_hess[0]
        rows.append(term.score[0] + s.a_th[0])
    return value, rows, hess


def _pp_bundle(maxima, data: PpData, params: GevParams, kind: str) -> LoglikBundle:
    n_max = 0 if maxima is None else np.atleast_1d(maxima).size
    n_rows = n_max + data.n + (1 if data.terminal is not None else 0)
    if kind == "std":
        n_rows += 1
    pts = _anchor_points(data, params)
    if pts is None:
        return LoglikBundle.invalid(n_rows, 3)
    res = _process_rows(data, pts, kind)
    if res is None:
        return LoglikBundle.invalid(n_rows, 3)
    value, rows, hess = res
    per_obs = np.asarray(rows, dtype=float) if rows else np.zeros((0, 3))

    if n_max:
        gb = gev_loglik(np.atleast_1d(maxima), params)
        if not gb.in_support:
            return LoglikBundle.invalid(n_rows, 3)
        value += gb.value
        hess = hess - gb.obs_info
        per_obs = np.vstack([gb.per_obs_scores, per_obs])

    return LoglikBundle(
        value=float(value),
        score=per_obs.sum(axis=0),
        obs_info=-hess,
        per_obs_scores=per_obs,
    )


def loglik_std(data: PpData, params: GevParams) -> LoglikBundle:
    """Unconditional stopped-process log likelihood, exposure -t*Lambda(u)."""
    return _pp_bundle(None, data, params, "std")


def loglik_fc(data: PpData, params: GevParams) -> LoglikBundle:
    """Sizes conditioned on the event count and the stopping time."""
    return _pp_bundle(None, data, params, "fc")


def loglik_pc(data: PpData, params: GevParams) -> LoglikBundle:
    """As fc, but ignoring the right truncation of the sub-barrier sizes."""
    return _pp_bundle(None, data, params, "pc")


def combined_loglik(maxima, data: PpData, params: GevParams,
                    likelihood: str = "std") -> LoglikBundle:
    """Process likelihood plus an independent block-maxima component."""
    if likelihood not in _PP_KINDS:
        raise ValueError(f"unknown likelihood {likelihood!r}; pick from {_PP_KINDS}")
    return _pp_bundle(maxima, data, params, likelihood)


def stopping_prob(n: int, t: float, params: GevParams, u: float, s: float) -> float:
    """Probability element of stopping at time t after n sub-barrier events.

    Poisson mass at n for the events in (u, s) over (0, t) times the
    exponential density of the stopping time; zero when Lambda(s) = 0
    (the barrier is never reached).
    """
    if n < 0 or t <= 0.0:
        raise ValueError("need n >= 0 and t > 0")
    lam_u = float(pp_lambda(u, params)[0])
    lam_s = float(pp_lambda(s, params)[0])
    if lam_s <= 0.0:
        return 0.0
    D = lam_u - lam_s
    if not np.isfinite(D) or not (D > 0.0):
        raise ValueError("u must sit strictly below s inside the support")
    log_mass = -t * D if n == 0 else n * math.log(t * D) - math.lgamma(n + 1.0) - t * D
    return math.exp(log_mass - t * lam_s) * lam_s


# ---------------------------------------------------------------------------
# fitting


def _h_scale(xi: float, L: float) -> float:
    # (exp(xi*L) - 1)/xi with its Gumbel limit
    t = xi * L
    if abs(t) < 1e-8:
        return L * (1.0 + 0.5 * t)
    return math.expm1(t) / xi


def _pp_start(data: PpData) -> np.ndarray:
    """Moment-style start: GP fit of the excesses plus rate matching.

    With rate = n/t exceedances per year, Lambda(u) ~ rate ties mu to the
    other two parameters, and the threshold-stability relation
    sigma = tau_u * Lambda(u)^xi converts the GP scale.
    """
    y = data.exceedances
    if data.terminal is not None:
        y = np.append(y, data.terminal)
    if y.size >= 5:
        g = fit_gp(y - data.u)
        tau_u, xi = g.params.tau, g.params.xi
        if xi <= XI_NONREGULAR:
            xi = 0.0
        rate = max(y.size / data.t, 1e-12)
        sigma = tau_u * rate**xi
        mu = data.u + sigma * _h_scale(xi, math.log(rate))
        return np.array([mu, sigma, xi])
    if data.n_maxima >= 5:
        g = fit_gev(data.maxima)
        return np.array([g.params.mu, g.params.sigma, g.params.xi])
    raise ValueError("too few observations to start the fit")


def fit_pp(data: PpData, likelihood: str = "std", start=None,
           tol: float = 1e-9) -> FitResult:
    """MLE of (mu, sigma, xi) under the chosen stopped-process likelihood."""
    if likelihood not in _PP_KINDS:
        raise ValueError(f"unknown likelihood {likelihood!r}; pick from {_PP_KINDS}")
    maxima = data.maxima

    def fn(x):
        mu, sigma, xi = x
        if sigma <= 0.0 or xi < XI_LOWER:
            return -np.inf, np.full(3, np.nan), np.full((3, 3), np.nan), False
        b = _pp_bundle(maxima, data, GevParams(mu, sigma, xi), likelihood)
        return b.value, b.score, b.obs_info, b.in_support

    x0 = np.asarray(start, dtype=float) if start is not None else _pp_start(data)
    if not fn(x0)[3]:
        x0 = x0.copy()
        x0[2] = 0.1
    x0 = _nelder_warmup(lambda x: fn(x)[0] if fn(x)[3] else -1e12, x0)
    x, value, grad, nh, converged, _ = newton_maximize(fn, x0, tol=tol)

    params = GevParams(*x)
    flags = []
    if params.xi <= XI_LOWER + 1e-6:
        flags.append("shape_lower_bound")
        converged = False
    if params.xi <= XI_NONREGULAR:
        flags.append("shape_nonregular")
    if not converged:
        flags.append("not_converged")
    cov, se, pd_ok = _cov_and_se(nh, ("mu", "sigma", "xi"))
    if not pd_ok:
        flags.append("info_not_pd")
    n_obs = data.n + (1 if data.terminal is not None else 0) + data.n_maxima
    return FitResult(
        params=params,
        loglik=float(value),
        se=se,
        cov=cov,
        converged=converged,
        n=n_obs,
        score_norm=float(np.max(np.abs(grad))),
        flags=tuple(flags),
    )


# ---------------------------------------------------------------------------
# canonical parameter of the tangent model for the std likelihood


def _measure_cap(params: GevParams, eps: float = 1e-12) -> float:
    """Upper size limit: measure eps, or the support endpoint when finite."""
    if params.xi < 0.0:
        return params.mu - params.sigma / params.xi
    return float(_lam_inv(np.array([eps]), params)[0])


def pp_tem_phi(params: GevParams, params_hat: GevParams, u: float, t: float,
               method: str = "quad", events=None, y_cap=None):
    """Canonical parameter (and its Jacobian) of the process component.

    The defining integral is t * int over sizes in (u, cap) of
    dintensity/dtheta frozen at the MLE, times log intensity at params.
    Two evaluators:

    quad    substitutes v = Lambda(y; params_hat), so the integrand becomes
            score(y(v); hat) * log intensity(y(v); params) over the finite
            range (Lambda(cap; hat), Lambda(u; hat)); cap defaults to the
            point where the fitted measure drops to 1e-12 (or the support
            endpoint) and is clipped to the support of params so the value
            stays finite under shrinking-support alternatives.
    events  the empirical version, summing score(y_j; hat) weighted by
            log intensity / intensity at params over the observed sizes;
            its mean under a process with parameter `params` equals the
            integral for every value of params, not just near the MLE.

    Returns (phi, dphi): a 3-vector and its 3x3 Jacobian in the native
    parameters.
    """
    if method == "events":
        ev = np.atleast_1d(np.asarray(events, dtype=float))
        pt_hat = _Point(ev, params_hat)
        pt = _Point(ev, params)
        if not (pt_hat.ok and pt.ok):
            raise ValueError("event outside the model support")
        dint_hat = pt_hat.intensity[:, None] * pt_hat.score
        w = 1.0 / pt.intensity
        phi = (dint_hat * (w * pt.logint)[:, None]).sum(axis=0)
        # d/dtheta of log intensity / intensity = score (1 - log intensity)/intensity
        dphi = np.einsum("ij,i,ik->jk", dint_hat, w * (1.0 - pt.logint), pt.score)
        return phi, dphi
    if method != "quad":
        raise ValueError("method must be 'quad' or 'events'")

    cap = _measure_cap(params_hat) if y_cap is None else float(y_cap)
    if params.xi < 0.0:
        cap = min(cap, params.mu - params.sigma / params.xi)
    if not (cap > u):
        raise ValueError("empty integration region for the canonical parameter")
    v_hi = float(pp_lambda(u, params_hat)[0])
    v_lo = max(float(pp_lambda(cap, params_hat)[0]), 1e-300)
    if not (np.isfinite(v_hi) and v_hi > v_lo):
        raise ValueError("threshold outside the fitted support")

    def f(v):
        y = _lam_inv(np.array([v]), params_hat)
        pt_hat = _Point(y, params_hat)
        pt = _Point(y, params)
        if not (pt_hat.ok and pt.ok):
            return np.zeros(12)
        out = np.empty(12)
        out[:3] = pt_hat.score[0] * pt.logint[0]
        out[3:] = np.outer(pt_hat.score[0], pt.score[0]).ravel()
        return out

    vals, _ = integrate.quad_vec(f, v_lo, v_hi, epsabs=1e-11, epsrel=1e-10, limit=300)
    return t * vals[:3], t * vals[3:].reshape(3, 3)


# ---------------------------------------------------------------------------
# simulation


def simulate_stopped(params: GevParams, u: float, s: float, t_max: float,
                     rng: np.random.Generator, n_maxima: int = 0) -> PpData:
    """Draw a stopped-process sample, optionally with independent maxima."""
    lam_u = float(pp_lambda(u, params)[0])
    lam_s = float(pp_lambda(s, params)[0])
    if not np.isfinite(lam_u) or not (lam_u > lam_s >= 0.0):
        raise ValueError("need Lambda(u) > Lambda(s) at the generating parameters")
    T = rng.exponential(1.0 / lam_s) if lam_s > 0.0 else np.inf
    stopped = bool(T <= t_max)
    t = float(min(T, t_max))
    n = int(rng.poisson(t * (lam_u - lam_s)))
    ev = _lam_inv(lam_s + rng.uniform(size=n) * (lam_u - lam_s), params)
    terminal = None
    if stopped:
        terminal = float(_lam_inv(np.array([rng.uniform() * lam_s]), params)[0])
    maxima = gev_rvs(params, n_maxima, rng) if n_maxima else None
    return PpData(t=t, u=u, s=s, exceedances=np.sort(ev), terminal=terminal,
                  maxima=maxima)


# ---------------------------------------------------------------------------
# engine model


class PpModel:
    """Engine-coordinate stopped-process model; x = (eta, sigma, xi).

    The annual-maximum law implied by the process is GEV(mu, sigma, xi),
    so the interest map is exactly the block-maxima risk map.  fc and pc
    use the iid tangent construction with truncated-distribution pivots;
    std uses the canonical-parameter integral of the process, switching to
    the event-sum evaluator once EVENT_SUM_MIN sizes are on hand.
    """

    p = 3
    EVENT_SUM_MIN = 50

    def __init__(self, data: PpData, spec, transform=None):
        self.data = data
        if isinstance(spec, ModelSpec):
            kind = {"pp_std": "std", "pp_fc": "fc", "pp_pc": "pc"}.get(spec.family)
            if kind is None:
                raise ValueError("PpModel needs a pp_std, pp_fc or pp_pc family")
            risk = spec.risk
        else:
            kind, risk = "std", spec
        self.kind = kind
        self.spec = risk
        self.map = GevRiskMap(risk, "pp", transform)
        self.lam_names = self.map.lam_names
        self.n = data.n_maxima + data.n + (1 if data.terminal is not None else 0)
        if kind == "std":
            self.n += 1
        self._phi_cache = {}

    # -- likelihood ---------------------------------------------------------
    def nat(self, x) -> Optional[GevParams]:
        return self.map.nat(x)

    def bundle(self, x) -> LoglikBundle:
        params = self.nat(x)
        if params is None:
            return LoglikBundle.invalid(self.n, self.p)
        nb = _pp_bundle(self.data.maxima, self.data, params, self.kind)
        if not nb.in_support:
            return LoglikBundle.invalid(self.n, self.p)
        J, H = self.map.jac_hess(x)
        return _eng_bundle(nb, J, H)

    # -- tangent model ------------------------------------------------------
    def _event_sizes(self) -> np.ndarray:
        if self.data.terminal is not None:
            return np.append(self.data.exceedances, self.data.terminal)
        return self.data.exceedances

    def _iid_rows(self, params: GevParams):
        """dlogf_dy and mixed-derivative rows: [maxima, events, terminal]."""
        dlog, G = [], []
        if self.data.n_maxima:
            ot = gev_obs_terms(self.data.maxima, params)
            if not np.all(ot["ok"]):
                raise ValueError("block maximum outside the model support")
            dlog.append(ot["dlogf_dy"])
            G.append(ot["d2logf_dy_dtheta"])
        sizes = self._event_sizes()
        if sizes.size:
            pt = _Point(sizes, params)
            if not pt.ok:
                raise ValueError("event outside the model support")
            dlog.append(pt.dlogint_dy)
            G.append(pt.G)
        return np.concatenate(dlog), np.vstack(G)

    def _max_V(self, params: GevParams) -> np.ndarray:
        z = (self.data.maxima - params.mu) / params.sigma
        k = shape_kernels(z, params.xi)
        return np.column_stack([np.ones(z.size), z, -params.sigma * k.w * k.A_x])

    def _trunc_V(self, params: GevParams) -> np.ndarray:
        """Pivot directions -dF/dtheta / dF/dy for every observation row."""
        d = self.data
        blocks = []
        if d.n_maxima:
            blocks.append(self._max_V(params))
        pt_u = _Point(np.array([d.u]), params)
        pt_s = _Point(np.array([d.s]), params)
        if not (pt_u.ok and pt_s.ok):
            raise ValueError("threshold or barrier outside the model support")
        if d.n:
            ev = _Point(d.exceedances, params)
            if self.kind == "fc":
                det_th = pt_u.lam_th[0] - pt_s.lam_th[0]
                F = (pt_u.lam - ev.lam) / (pt_u.lam[0] - pt_s.lam[0])
            else:
                det_th = pt_u.lam_th[0]
                F = 1.0 - ev.lam / pt_u.lam[0]
            num = (pt_u.lam_th - ev.lam_th) - F[:, None] * det_th
            blocks.append(num / (-ev.intensity)[:, None])
        if d.terminal is not None:
            pt = _Point(np.array([d.terminal]), params)
            F = 1.0 - pt.lam / pt_s.lam
            num = (pt_s.lam_th - pt.lam_th) - F[:, None] * pt_s.lam_th
            blocks.append(num / (-pt.intensity)[:, None])
        return np.vstack(blocks)

    def tem_terms(self, x):
        params = self.nat(x)
        if params is None:
            raise ValueError("infeasible engine point in tem_terms")
        dlog, G = self._iid_rows(params)
        J, _ = self.map.jac_hess(x)
        return dlog, G @ J

    def V(self, x_hat):
        params = self.nat(x_hat)
        J, _ = self.map.jac_hess(x_hat)
        if self.kind in ("fc", "pc"):
            return self._trunc_V(params) @ J
        # std: the canonical parameter is an integral against the fitted
        # intensity, so carry the fit and the frozen Jacobian instead of a
        # per-row direction matrix
        V_max = self._max_V(params) if self.data.n_maxima else None
        return {"params_hat": params, "J_hat": J, "V_max": V_max}

    def phi(self, x, V) -> np.ndarray:
        if self.kind in ("fc", "pc"):
            dlog, _ = self.tem_terms(x)
            return V.T @ dlog
        phi_nat, _ = self._std_phi(self.nat(x), V)
        return V["J_hat"].T @ phi_nat

    def dphi(self, x, V) -> np.ndarray:
        if self.kind in ("fc", "pc"):
            _, G_eng = self.tem_terms(x)
            return V.T @ G_eng
        _, dphi_nat = self._std_phi(self.nat(x), V)
        J, _ = self.map.jac_hess(x)
        return V["J_hat"].T @ dphi_nat @ J

    def _std_phi(self, params: GevParams, V):
        hat = V["params_hat"]
        key = (params.mu, params.sigma, params.xi)
        if key in self._phi_cache:
            return self._phi_cache[key]
        sizes = self._event_sizes()
        if sizes.size >= self.EVENT_SUM_MIN:
            phi, dphi = pp_tem_phi(params, hat, self.data.u, self.data.t,
                                   method="events", events=sizes)
        else:
            phi, dphi = pp_tem_phi(params, hat, self.data.u, self.data.t)
        if V["V_max"] is not None:
            ot = gev_obs_terms(self.data.maxima, params)
            if not np.all(ot["ok"]):
                raise ValueError("block maximum outside the model support")
            phi = phi + V["V_max"].T @ ot["dlogf_dy"]
            dphi = dphi + V["V_max"].T @ ot["d2logf_dy_dtheta"]
        self._phi_cache[key] = (phi, dphi)
        return phi, dphi

    # -- misc protocol ------------------------------------------------------
    def eng_from_nat(self, params: GevParams) -> np.ndarray:
        return self.map.eng_from_nat(params)

    def feasible_interval(self):
        if self.spec.kind == "prob_exceed":
            lo, hi = 0.0, 1.0
        else:
            lo, hi = -np.inf, np.inf
        return _map_interval(self.map.tr, lo, hi)


def analyze_pp(data: PpData, spec: ModelSpec, transform=None, options=None):
    """Fit then profile the stopped-process model; (FitResult, ProfileTrace)."""
    from .profile import profile_model

    kind = {"pp_std": "std", "pp_fc": "fc", "pp_pc": "pc"}[spec.family]
    model = PpModel(data, spec, transform)
    fit = fit_pp(data, likelihood=kind)
    x_hat = model.eng_from_nat(fit.params)
    trace = profile_model(model, x_hat, options)
    return fit, trace
