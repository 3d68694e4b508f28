"""Generalized Pareto inference for lifetimes observed beyond a high age.

Each record is the time lived past a threshold age u: subjects enter the
study only if they pass u inside an observation window, so a subject who
reached u before the window opened is seen conditionally on having survived
trunc extra years (left truncation), and a subject still alive when the
window closes contributes a survival term only (right censoring).  With
S(t) = (1 + xi t/tau)_+^(-1/xi) the per-record log likelihood is

    (1 - a) log f(t) + a log S(t) - log S(trunc),

a = 1 for censored records.  All derivative work runs through the shared
shape kernels, so with no truncation and no censoring the likelihood
reduces to the plain iid GP one term by term.

A negative shape puts a finite upper limit u - tau/xi on the lifespan;
that limit is the interest parameter of the endpoint profile, with the
usual higher-order corrections.  Because the limit sits at infinity when
the fitted shape is nonnegative, the profile then degrades to the signed
root alone, computed against the unconstrained maximum, and the trace is
flagged.  A parametric bootstrap of the squared likelihood root, drawn
under the constrained fit at each candidate limit and respecting each
record's truncation and censoring design, gives a finite-sample check on
the chi-square calibration.  The shape-zero submodel (exponential excess
life) yields the one-year survival probability exp(-years/tau).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.stats import chi2

from .families import GpParams, LoglikBundle
from .fit import (
    XI_LOWER,
    XI_NONREGULAR,
    FitResult,
    _cov_and_se,
    _nelder_warmup,
    constrained_fit,
    newton_maximize,
)
from .kernels import shape_kernels
from .models import GpRiskMap, ModelSpec, _eng_bundle, _map_interval
from .profile import HoaOptions, ProfileTrace, profile_model
from .risk import RiskSpec

DAYS_PER_YEAR = 365.25


# ---------------------------------------------------------------------------
# data containers


@dataclass(frozen=True)
class LifetimeRecord:
    """One subject: excess life above u, left-truncation time, censor flag.

    excess == 0 with censored=True is legal (reached u exactly at the close
    of the window) and contributes a vacuous survival term.
    """

    excess: float
    trunc: float = 0.0
    censored: bool = False

    def __post_init__(self):
        if not (np.isfinite(self.excess) and self.excess >= 0.0):
            raise ValueError("excess must be finite and nonnegative")
        if not (np.isfinite(self.trunc) and self.trunc >= 0.0):
            raise ValueError("trunc must be finite and nonnegative")


@dataclass(frozen=True)
class LtrcData:
    """Array form of a record list; all operations accept either."""

    t: np.ndarray
    v: np.ndarray
    a: np.ndarray

    @property
    def n(self) -> int:
        return self.t.size

    def records(self) -> list:
        return [
            LifetimeRecord(float(t), float(v), bool(a))
            for t, v, a in zip(self.t, self.v, self.a)
        ]


def as_ltrc_data(records) -> LtrcData:
    if isinstance(records, LtrcData):
        return records
    recs = list(records)
    if not recs:
        raise ValueError("need at least one lifetime record")
    t = np.array([r.excess for r in recs], dtype=float)
    v = np.array([r.trunc for r in recs], dtype=float)
    a = np.array([r.censored for r in recs], dtype=bool)
    return LtrcData(t, v, a)


_TRUTHY = {"1", "true", "t", "yes", "y"}
_FALSY = {"0", "false", "f", "no", "n", ""}


def _parse_flag(text: str) -> bool:
    s = text.strip().lower()
    if s in _TRUTHY:
        return True
    if s in _FALSY:
        return False
    raise ValueError(f"cannot parse censoring flag {text!r}")


def load_records(path, time_unit: str = "years") -> list:
    """Read records from CSV columns excess, trunc, censored.

    trunc and censored may be absent (default 0 and uncensored).  Day
    resolution inputs are converted to years, the module's working unit.
    """
    if time_unit not in ("years", "days"):
        raise ValueError("time_unit must be 'years' or 'days'")
    scale = 1.0 if time_unit == "years" else 1.0 / DAYS_PER_YEAR
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "excess" not in reader.fieldnames:
            raise ValueError("CSV needs an 'excess' column")
        for row in reader:
            excess = float(row["excess"]) * scale
            trunc = float(row.get("trunc") or 0.0) * scale
            censored = _parse_flag(row.get("censored") or "0")
            out.append(LifetimeRecord(excess, trunc, censored))
    return out


def raise_threshold(records, delta_u: float) -> list:
    """Records re-expressed over the higher threshold u + delta_u.

    Excesses shift down by delta_u and truncation times become
    max(trunc - delta_u, 0): a subject already past the new threshold when
    the window opened is truncated by the remaining overlap only.  Subjects
    whose excess never reached the new threshold drop out; a censored
    excess landing exactly at zero stays (alive at the close, just at u').
    """
    if not (np.isfinite(delta_u) and delta_u >= 0.0):
        raise ValueError("delta_u must be finite and nonnegative")
    out = []
    for r in records:
        e = r.excess - delta_u
        if e > 0.0 or (e == 0.0 and r.censored):
            out.append(LifetimeRecord(e, max(r.trunc - delta_u, 0.0), r.censored))
    return out


# ---------------------------------------------------------------------------
# likelihood


def ltrc_gp_loglik(records, params: GpParams) -> LoglikBundle:
    """Analytic LTRC generalized Pareto log likelihood, native (tau, xi).

    Per-record rows combine the death or survival term at the observed
    excess with the survival offset at the truncation time, so the rows
    sum to the score and the trunc=0 uncensored case matches gp_loglik
    entry for entry.
    """
    d = as_ltrc_data(records)
    n = d.n
    tau, xi = params.tau, params.xi
    with np.errstate(over="ignore", invalid="ignore"):
        z = d.t / tau
        zv = d.v / tau
        k = shape_kernels(z, xi)
        kv = shape_kernels(zv, xi)
        if not (np.all(k.ok) and np.all(kv.ok)):
            return LoglikBundle.invalid(n, 2)
        return _ltrc_bundle(d, tau, xi, z, zv, k, kv)


def _ltrc_bundle(d, tau, xi, z, zv, k, kv) -> LoglikBundle:
    dead = ~d.a

    # observation terms: log f for deaths, log S for censored
    T_z = -xi / k.w - k.A_z
    T_x = -z / k.w - k.A_x
    T_zz = (xi / k.w) ** 2 - k.A_zz
    T_zx = -1.0 / k.w**2 - k.A_zx
    T_xx = (z / k.w) ** 2 - k.A_xx

    val_obs = np.where(dead, -np.log(tau) - k.logw - k.A, -k.A)
    s_tau_obs = np.where(dead, -1.0 / tau - T_z * z / tau, k.A_z * z / tau)
    s_xi_obs = np.where(dead, T_x, -k.A_x)
    h_tt_obs = np.where(
        dead,
        (1.0 + T_zz * z**2 + 2.0 * T_z * z) / tau**2,
        -(k.A_zz * z**2 + 2.0 * k.A_z * z) / tau**2,
    )
    h_tx_obs = np.where(dead, -T_zx * z / tau, k.A_zx * z / tau)
    h_xx_obs = np.where(dead, T_xx, -k.A_xx)

    # truncation offsets: -log S(v) = +A(v)
    val_tr = kv.A
    s_tau_tr = -kv.A_z * zv / tau
    s_xi_tr = kv.A_x
    h_tt_tr = (kv.A_zz * zv**2 + 2.0 * kv.A_z * zv) / tau**2
    h_tx_tr = -kv.A_zx * zv / tau
    h_xx_tr = kv.A_xx

    value = float(np.sum(val_obs + val_tr))
    per_obs = np.column_stack([s_tau_obs + s_tau_tr, s_xi_obs + s_xi_tr])
    score = per_obs.sum(axis=0)
    H = np.empty((2, 2))
    H[0, 0] = np.sum(h_tt_obs + h_tt_tr)
    H[0, 1] = H[1, 0] = np.sum(h_tx_obs + h_tx_tr)
    H[1, 1] = np.sum(h_xx_obs + h_xx_tr)

    return LoglikBundle(value=value, score=score, obs_info=-H, per_obs_scores=per_obs)


def _ltrc_fn(data: LtrcData):
    def fn(x):
        tau, xi = x
        if tau <= 0.0 or xi < XI_LOWER:
            return -np.inf, np.full(2, np.nan), np.full((2, 2), np.nan), False
        b = ltrc_gp_loglik(data, GpParams(tau, xi))
        return b.value, b.score, b.obs_info, b.in_support

    return fn


def _exp_start(data: LtrcData) -> float:
    """Exponential MLE of the mean under LTRC: sum(t - v) / deaths."""
    exposure = float(np.sum(data.t - data.v))
    deaths = int(np.sum(~data.a))
    if exposure <= 0.0:
        return 1.0
    return exposure / max(deaths, 1)


def fit_ltrc(records, start=None, tol=1e-9) -> FitResult:
    """Maximum likelihood for LTRC GP excess lifetimes."""
    data = as_ltrc_data(records)
    if data.n < 2:
        raise ValueError("need at least 2 records to fit")
    fn = _ltrc_fn(data)
    if start is not None:
        x0 = np.asarray(start, dtype=float)
    else:
        tau0 = _exp_start(data)
        cands = [np.array([tau0, x]) for x in (0.0, 0.1, -0.1)]
        finite = [x for x in cands if fn(x)[3] and np.isfinite(fn(x)[0])]
        x0 = max(finite, key=lambda x: fn(x)[0]) if finite else cands[0]
    if not fn(x0)[3]:
        x0 = np.array([_exp_start(data), 0.0])
    x, value, grad, nh, converged, _ = newton_maximize(fn, x0, tol=tol)
    if not converged:
        x1 = _nelder_warmup(lambda z: fn(z)[0] if fn(z)[3] else -1e12, x)
        x, value, grad, nh, converged, _ = newton_maximize(fn, x1, tol=tol)
    params = GpParams(*x)
    flags = []
    tmax = float(np.max(data.t))
    near_support_edge = params.xi < 0.0 and (1.0 + params.xi * tmax / params.tau) < 1e-8
    if params.xi <= XI_LOWER + 1e-6 or near_support_edge:
        flags.append("shape_lower_bound")
        converged = False
    if params.xi <= XI_NONREGULAR:
        flags.append("shape_nonregular")
    if not converged:
        flags.append("not_converged")
    cov, se, pd_ok = _cov_and_se(nh, ("tau", "xi"))
    if not pd_ok:
        flags.append("info_not_pd")
    return FitResult(
        params=params,
        loglik=float(value),
        se=se,
        cov=cov,
        converged=converged,
        n=data.n,
        score_norm=float(np.max(np.abs(grad))),
        flags=tuple(flags),
    )


# ---------------------------------------------------------------------------
# engine model: lifespan limit as interest


class LtrcModel:
    """LTRC GP records with the endpoint (or any GP risk kind) as interest."""

    p = 2

    def __init__(self, records, spec, transform=None):
        self.data = as_ltrc_data(records)
        risk = spec.risk if isinstance(spec, ModelSpec) else spec
        self.spec = risk
        self.map = GpRiskMap(risk, "ltrc", transform)
        self.lam_names = self.map.lam_names
        self.n = self.data.n

    def nat(self, x):
        return self.map.nat(x)

    def bundle(self, x) -> LoglikBundle:
        params = self.nat(x)
        if params is None:
            return LoglikBundle.invalid(self.n, self.p)
        nb = ltrc_gp_loglik(self.data, params)
        if not nb.in_support:
            return LoglikBundle.invalid(self.n, self.p)
        J, H = self.map.jac_hess(x)
        return _eng_bundle(nb, J, H)

    def tem_terms(self, x):
        params = self.nat(x)
        if params is None:
            raise ValueError("infeasible engine point in tem_terms")
        tau, xi = params.tau, params.xi
        d = self.data
        z = d.t / tau
        k = shape_kernels(z, xi)
        T_z = -xi / k.w - k.A_z
        T_zz = (xi / k.w) ** 2 - k.A_zz
        T_zx = -1.0 / k.w**2 - k.A_zx
        dead = ~d.a
        # sample-space derivative of each record's log-likelihood term
        dldy = np.where(dead, T_z / tau, -k.A_z / tau)
        G = np.empty((self.n, 2))
        G[:, 0] = np.where(
            dead, -(T_zz * z + T_z) / tau**2, (k.A_zz * z + k.A_z) / tau**2
        )
        G[:, 1] = np.where(dead, T_zx / tau, -k.A_zx / tau)
        J, _ = self.map.jac_hess(x)
        return dldy, G @ J

    def V(self, x_hat) -> np.ndarray:
        """Truncated-cdf pivot directions at the MLE.

        The pivot is the conditional cdf given survival past the truncation
        time, 1 - S(t)/S(v); censored rows use the same directions since
        the recorded value enters the likelihood at the same point.
        """
        params = self.nat(x_hat)
        tau, xi = params.tau, params.xi
        d = self.data
        z = d.t / tau
        zv = d.v / tau
        k = shape_kernels(z, xi)
        kv = shape_kernels(zv, xi)
        V_nat = np.column_stack(
            [z - (k.w / kv.w) * zv, -tau * k.w * (k.A_x - kv.A_x)]
        )
        J, _ = self.map.jac_hess(x_hat)
        return V_nat @ J

    def phi(self, x, V) -> np.ndarray:
        dldy, _ = self.tem_terms(x)
        return V.T @ dldy

    def dphi(self, x, V) -> np.ndarray:
        _, G_eng = self.tem_terms(x)
        return V.T @ G_eng

    def eng_from_nat(self, params) -> np.ndarray:
        return self.map.eng_from_nat(params)

    def feasible_interval(self):
        u = self.spec.u
        if self.spec.kind == "endpoint":
            lo = u + float(np.max(self.data.t))
        else:
            lo = u
        return _map_interval(self.map.tr, lo, np.inf)


# ---------------------------------------------------------------------------
# endpoint profile


def endpoint_profile(
    records,
    iota_grid=None,
    u: float = 0.0,
    transform=None,
    options: Optional[HoaOptions] = None,
) -> ProfileTrace:
    """Profile the lifespan limit iota = u - tau/xi with nuisance shape.

    iota_grid fixes the evaluation points (total-age scale when u is the
    threshold age, excess scale when u=0); otherwise the grid is adaptive.
    When the fitted shape is nonnegative the limit estimate is infinite:
    the trace then carries the signed root only, computed against the
    unconstrained maximum, with na higher-order columns and flags
    no_finite_endpoint_mle / open_upper_endpoint.
    """
    fit = fit_ltrc(records)
    spec = RiskSpec(kind="endpoint", u=u)
    model = LtrcModel(records, spec, transform)
    if fit.params.xi < 0.0:
        x_hat = model.eng_from_nat(fit.params)
        grid = None
        if iota_grid is not None:
            grid = np.array(
                [model.map.tr.fwd(float(i)) for i in np.atleast_1d(iota_grid)]
            )
        return profile_model(model, x_hat, options, eta_grid=grid)
    return _positive_shape_trace(model, fit, iota_grid, u, options)


def _positive_shape_trace(model, fit, iota_grid, u, options) -> ProfileTrace:
    """Signed-root-only profile when the MLE sits at an infinite limit."""
    opts = options or HoaOptions()
    tmax = float(np.max(model.data.t))
    if iota_grid is None:
        iotas = u + tmax * (1.0 + np.geomspace(0.02, 50.0, 80))
    else:
        iotas = np.atleast_1d(np.asarray(iota_grid, dtype=float))
    iotas = np.unique(iotas)
    if np.any(iotas <= u + tmax):
        raise ValueError("iota grid must exceed the largest observed lifetime")

    m = iotas.size
    loglik_p = np.full(m, np.nan)
    nuis = np.full((m, 1), np.nan)
    conv = np.zeros(m, dtype=bool)
    lam = np.array([-0.02])
    # march from the largest limit (shape nearest zero) downward
    for i in range(m - 1, -1, -1):
        eta = model.map.tr.fwd(float(iotas[i]))
        lam_i, bundle, ok = constrained_fit(model, eta, lam, tol=opts.tol)
        conv[i] = ok
        if ok:
            lam = lam_i
            nuis[i] = lam_i
            loglik_p[i] = bundle.value

    with np.errstate(invalid="ignore"):
        r = np.where(
            conv, np.sqrt(np.maximum(2.0 * (fit.loglik - loglik_p), 0.0)), np.nan
        )
    nan = np.full(m, np.nan)
    psi = np.array([model.map.tr.fwd(float(i)) for i in iotas])
    return ProfileTrace(
        psi=psi,
        loglik_p=loglik_p,
        nuisance=nuis,
        r=r,
        q=nan.copy(),
        rstar_raw=nan.copy(),
        rstar=nan.copy(),
        sev_tem=nan.copy(),
        sev_cov=nan.copy(),
        r_sev_tem=nan.copy(),
        r_sev_cov=nan.copy(),
        converged=conv,
        replaced=np.zeros(m, dtype=bool),
        psi_hat=float("inf"),
        loglik_max=fit.loglik,
        se_wald=float("nan"),
        psi_hat_sev_tem=float("nan"),
        psi_hat_sev_cov=float("nan"),
        flags=("no_finite_endpoint_mle", "open_upper_endpoint"),
    )


# ---------------------------------------------------------------------------
# bootstrap calibration of the squared likelihood root


@dataclass(frozen=True)
class PvalueCurve:
    """Bootstrap and chi-square p-value functions for the lifespan limit."""

    iota: np.ndarray
    r2: np.ndarray
    pvalue: np.ndarray
    pvalue_chi2: np.ndarray
    n_failed: np.ndarray
    B: int
    iota_hat: float
    flags: tuple = ()


def simulate_ltrc(params: GpParams, trunc, horizon, rng) -> LtrcData:
    """GP excess lifetimes conditional on surviving past each truncation
    time, administratively censored at each horizon (inf for none)."""
    v = np.atleast_1d(np.asarray(trunc, dtype=float))
    hz = np.broadcast_to(np.asarray(horizon, dtype=float), v.shape)
    tau, xi = params.tau, params.xi
    U = rng.uniform(size=v.shape)
    if abs(xi) < 1e-12:
        t = v - tau * np.log(U)
    else:
        wv = 1.0 + xi * v / tau
        if np.any(wv <= 0.0):
            raise ValueError("truncation time beyond the support")
        t = tau / xi * (wv * U ** (-xi) - 1.0)
    a = t >= hz
    return LtrcData(np.where(a, hz, t), v, a)


def bootstrap_pvalue_curve(
    records, iota_grid, B: int = 999, seed=0, u: float = 0.0
) -> PvalueCurve:
    """Parametric bootstrap p-value for the hypothesis iota = iota_0.

    At each grid value the null model is the constrained fit (shape profiled
    with the limit pinned); B samples are redrawn under it, respecting each
    record's truncation time and censoring horizon, and the p-value is the
    fraction of squared likelihood roots beyond the observed one.  The
    chi-square(1) curve sits alongside for comparison.  Replicates whose
    refit fails are dropped and counted per grid value.
    """
    if B < 199:
        raise ValueError("B must be at least 199 for a stable tail fraction")
    data = as_ltrc_data(records)
    iotas = np.unique(np.atleast_1d(np.asarray(iota_grid, dtype=float)))
    tmax = float(np.max(data.t))
    if np.any(iotas <= u + tmax):
        raise ValueError("iota grid must exceed the largest observed lifetime")

    fit = fit_ltrc(data)
    spec = RiskSpec(kind="endpoint", u=u)
    model = LtrcModel(data, spec)
    horizon = np.where(data.a, data.t, np.inf)

    m = iotas.size
    r2 = np.full(m, np.nan)
    pval = np.full(m, np.nan)
    n_failed = np.zeros(m, dtype=int)
    flags = []

    # observed constrained curve, warm started from the largest limit
    lam = np.array([fit.params.xi if fit.params.xi < 0.0 else -0.02])
    null_fits = [None] * m
    for i in range(m - 1, -1, -1):
        lam_i, bundle, ok = constrained_fit(model, float(iotas[i]), lam)
        if ok:
            lam = lam_i
            xi_i = float(lam_i[0])
            null_fits[i] = GpParams(-(iotas[i] - u) * xi_i, xi_i)
            r2[i] = max(2.0 * (fit.loglik - bundle.value), 0.0)

    children = np.random.SeedSequence(seed).spawn(m)
    for i in range(m):
        if null_fits[i] is None:
            flags.append("null_fit_failed")
            continue
        rng = np.random.default_rng(children[i])
        exceed = 0
        used = 0
        start = np.array([null_fits[i].tau, null_fits[i].xi])
        for _ in range(B):
            sim = simulate_ltrc(null_fits[i], data.v, horizon, rng)
            try:
                fit_b = fit_ltrc(sim, start=start)
            except ValueError:
                n_failed[i] += 1
                continue
            if not np.isfinite(fit_b.loglik) or "not_converged" in fit_b.flags:
                n_failed[i] += 1
                continue
            model_b = LtrcModel(sim, spec)
            _, bundle_b, ok_b = constrained_fit(
                model_b, float(iotas[i]), np.array([null_fits[i].xi])
            )
            if not ok_b:
                n_failed[i] += 1
                continue
            r2_b = max(2.0 * (fit_b.loglik - bundle_b.value), 0.0)
            used += 1
            if r2_b > r2[i]:
                exceed += 1
        if used > 0:
            pval[i] = exceed / used
        else:
            flags.append("all_replicates_failed")

    iota_hat = (
        u - fit.params.tau / fit.params.xi if fit.params.xi < 0.0 else float("inf")
    )
    return PvalueCurve(
        iota=iotas,
        r2=r2,
        pvalue=pval,
        pvalue_chi2=chi2.sf(r2, 1),
        n_failed=n_failed,
        B=B,
        iota_hat=iota_hat,
        flags=tuple(dict.fromkeys(flags)),
    )


# ---------------------------------------------------------------------------
# exponential submodel


def survival_prob_exponential(tau: float, years: float = 1.0) -> float:
    """P(survive `years` more | alive now) = exp(-years/tau) under shape 0."""
    if not (np.isfinite(tau) and tau > 0.0):
        raise ValueError("tau must be positive")
    if years < 0.0:
        raise ValueError("years must be nonnegative")
    return math.exp(-years / tau)


def fit_ltrc_exponential(records) -> FitResult:
    """Shape-zero submodel: MLE tau = total exposure / deaths, closed form."""
    data = as_ltrc_data(records)
    exposure = float(np.sum(data.t - data.v))
    deaths = int(np.sum(~data.a))
    if deaths == 0:
        raise ValueError("exponential fit needs at least one death")
    if exposure <= 0.0:
        raise ValueError("nonpositive total exposure")
    tau = exposure / deaths
    loglik = -deaths * math.log(tau) - exposure / tau
    se = tau / math.sqrt(deaths)
    return FitResult(
        params=GpParams(tau, 0.0),
        loglik=loglik,
        se={"tau": se},
        cov=np.array([[se**2]]),
        converged=True,
        n=data.n,
        score_norm=0.0,
        flags=(),
    )


def exponential_survival_ci(records, years: float = 1.0, level: float = 0.95):
    """Survival probability exp(-years/tau) with a likelihood-root interval.

    The submodel has one parameter, so the profile is the likelihood itself
    and the interval maps monotonically from the tau interval.
    """
    from scipy.stats import norm

    fit = fit_ltrc_exponential(records)
    data = as_ltrc_data(records)
    exposure = float(np.sum(data.t - data.v))
    deaths = int(np.sum(~data.a))
    tau_hat = fit.params.tau
    z = norm.ppf(0.5 + level / 2.0)

    def r(tau):
        ll = -deaths * math.log(tau) - exposure / tau
        return math.copysign(math.sqrt(max(2.0 * (fit.loglik - ll), 0.0)), tau_hat - tau)

    lo = brentq(lambda s: r(s) - z, tau_hat / 100.0, tau_hat)
    hi = brentq(lambda s: r(s) + z, tau_hat, tau_hat * 100.0)
    est = survival_prob_exponential(tau_hat, years)
    bounds = (survival_prob_exponential(lo, years), survival_prob_exponential(hi, years))
    return est, bounds
