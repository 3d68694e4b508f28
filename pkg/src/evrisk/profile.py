"""Profile likelihood and higher-order corrections on a risk-measure grid.

Given an engine model (see models.py) this module computes, on a grid of
interest values spanning the MLE:

    R(psi)        signed likelihood root from the profile log likelihood
    Q(psi)        tangent-model pivot from determinant ratios of the
                  canonical-parameter gradients and nuisance information
    R*(psi)       modified root R + log(Q/R)/R, stabilized near R = 0
    l_m(psi)      two modified profile log likelihoods (tangent-model and
                  empirical-covariance penalties) with their signed roots

Confidence limits come from monotone interpolation of a statistic against
psi, optionally polished by root finding on the exactly recomputed
statistic so that interest-preserving reparametrizations map limits to
machine accuracy.  The grid marches outward from the MLE with warm-started
nuisance fits; each side extends adaptively until |R| reaches r_max.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize
from scipy.interpolate import PchipInterpolator
from scipy.stats import norm

from .fit import constrained_fit, fit_gev, fit_gp, newton_maximize
from .models import ModelSpec, build_model

STATISTICS = ("r", "rstar", "sev_tem", "sev_cov")


@dataclass
class HoaOptions:
    grid_points: int = 101
    span_se: float = 5.0
    r_max: float = 3.5
    max_extend: int = 200
    extend_growth: float = 1.05
    stabilize: bool = True
    exclusion_r: float = 0.1
    outlier_z: float = 1.959963984540054  # sqrt of the 0.95 chi2_1 quantile
    tol: float = 1e-9


@dataclass
class Interval:
    lower: float
    upper: float
    level: float
    statistic: str
    flags: tuple = ()

    def astuple(self):
        return (self.lower, self.upper)


@dataclass
class _Anchor:
    """Quantities frozen at the full MLE that every grid point reuses."""

    x_hat: np.ndarray
    loglik: float
    V: np.ndarray
    phi_hat: np.ndarray
    sign_dphi: float
    logdet_dphi: float
    logdet_info: float
    per_obs_lam: np.ndarray
    se_eta: float
    cov_eng: Optional[np.ndarray]


@dataclass
class ProfileTrace:
    """Grid summaries; psi is the engine interest coordinate (eta)."""

    psi: np.ndarray
    loglik_p: np.ndarray
    nuisance: np.ndarray
    r: np.ndarray
    q: np.ndarray
    rstar_raw: np.ndarray
    rstar: np.ndarray
    sev_tem: np.ndarray
    sev_cov: np.ndarray
    r_sev_tem: np.ndarray
    r_sev_cov: np.ndarray
    converged: np.ndarray
    replaced: np.ndarray
    psi_hat: float
    loglik_max: float
    se_wald: float
    psi_hat_sev_tem: float
    psi_hat_sev_cov: float
    sev_tem_max: float = float("nan")
    sev_cov_max: float = float("nan")
    flags: tuple = ()
    model: object = field(default=None, repr=False)
    anchor: object = field(default=None, repr=False)

    def stat(self, name: str) -> np.ndarray:
        if name == "r":
            return self.r
        if name == "rstar":
            return self.rstar
        if name == "sev_tem":
            return self.r_sev_tem
        if name == "sev_cov":
            return self.r_sev_cov
        raise ValueError(f"unknown statistic {name!r}; pick from {STATISTICS}")


# ---------------------------------------------------------------------------
# anchor and per-point computations


def _full_mle_eng(model, x0, tol):
    def fn(x):
        b = model.bundle(x)
        if not b.in_support:
            p = x.size
            return -np.inf, np.full(p, np.nan), np.full((p, p), np.nan), False
        return b.value, b.score, b.obs_info, True

    x, value, grad, nh, converged, _ = newton_maximize(fn, x0, tol=tol)
    return x, value, nh, converged


def _make_anchor(model, x_hat, tol) -> _Anchor:
    # polish the incoming point so the anchor really is stationary
    x_hat, loglik, nh, converged = _full_mle_eng(model, np.asarray(x_hat, float), tol)
    if not converged:
        raise RuntimeError("full MLE did not reach stationarity in engine coordinates")
    V = model.V(x_hat)
    phi_hat = model.phi(x_hat, V)
    dphi_hat = model.dphi(x_hat, V)
    s_full, ld_full = np.linalg.slogdet(dphi_hat)
    if s_full == 0.0 or not np.isfinite(ld_full):
        raise RuntimeError("canonical-parameter gradient is singular at the MLE")
    s_info, ld_info = np.linalg.slogdet(nh)
    if s_info <= 0.0:
        raise RuntimeError("observed information not positive definite at the MLE")
    try:
        cov = np.linalg.inv(nh)
        se_eta = math.sqrt(max(cov[0, 0], 0.0))
    except np.linalg.LinAlgError:
        cov, se_eta = None, float("nan")
    per_obs = model.bundle(x_hat).per_obs_scores[:, 1:]
    return _Anchor(
        x_hat=x_hat,
        loglik=loglik,
        V=V,
        phi_hat=phi_hat,
        sign_dphi=float(s_full),
        logdet_dphi=float(ld_full),
        logdet_info=float(ld_info),
        per_obs_lam=per_obs,
        se_eta=se_eta,
        cov_eng=cov,
    )


def _point_row(model, anchor: _Anchor, eta, lam, bundle):
    """TEM and Severini pieces at one constrained solution."""
    x = np.concatenate(([eta], lam))
    out = {"q": np.nan, "sev_tem": np.nan, "sev_cov": np.nan}
    j_lam = bundle.obs_info[1:, 1:]
    s_j, ld_j = np.linalg.slogdet(j_lam)
    if s_j <= 0.0 or not np.isfinite(ld_j):
        return out
    phi = model.phi(x, anchor.V)
    dphi = model.dphi(x, anchor.V)
    M = dphi.copy()
    M[:, 0] = anchor.phi_hat - phi
    s_m, ld_m = np.linalg.slogdet(M)
    if np.isfinite(ld_m):
        out["q"] = (
            s_m
            * anchor.sign_dphi
            * math.exp(ld_m - anchor.logdet_dphi + 0.5 * (anchor.logdet_info - ld_j))
        )
    elif s_m == 0.0:
        out["q"] = 0.0
    s_t, ld_t = np.linalg.slogdet(dphi[1:, 1:])
    if s_t != 0.0 and np.isfinite(ld_t):
        out["sev_tem"] = bundle.value + 0.5 * ld_j - ld_t
    jcov = bundle.per_obs_scores[:, 1:].T @ anchor.per_obs_lam
    s_c, ld_c = np.linalg.slogdet(jcov)
    if s_c != 0.0 and np.isfinite(ld_c):
        out["sev_cov"] = bundle.value + 0.5 * ld_j - ld_c
    return out


def _signed_root(delta, sign):
    return float(np.copysign(math.sqrt(max(2.0 * delta, 0.0)), sign))


# ---------------------------------------------------------------------------
# stabilization


def stabilize_root_trace(r, rstar, exclusion_r=0.1, outlier_z=1.959963984540054):
    """Smooth R*-R against R with a cubic; patch the near-zero window.

    Points with |R| < exclusion_r, nonfinite R*, or studentized residual
    beyond outlier_z are replaced by the cubic prediction.  Returns
    (rstar_stabilized, replaced_mask, flags).
    """
    r = np.asarray(r, dtype=float)
    rstar = np.asarray(rstar, dtype=float)
    d = rstar - r
    usable = np.isfinite(r)
    fit_mask = usable & np.isfinite(d) & (np.abs(r) >= exclusion_r)
    if fit_mask.sum() < 10:
        return rstar.copy(), np.zeros(r.shape, dtype=bool), ("stabilize_skipped",)
    coef = np.polyfit(r[fit_mask], d[fit_mask], 3)
    pred = np.where(usable, np.polyval(coef, np.where(usable, r, 0.0)), np.nan)
    resid = d - pred
    s = float(np.std(resid[fit_mask], ddof=min(4, fit_mask.sum() - 1)))
    outliers = np.zeros(r.shape, dtype=bool)
    if s > 0.0:
        with np.errstate(invalid="ignore"):
            outliers = fit_mask & (np.abs(resid) > outlier_z * s)
    keep = fit_mask & ~outliers
    if outliers.any() and keep.sum() >= 10:
        # refit without the outliers so they do not pollute their own patch
        coef = np.polyfit(r[keep], d[keep], 3)
        pred = np.where(usable, np.polyval(coef, np.where(usable, r, 0.0)), np.nan)
    replaced = usable & (~fit_mask | outliers)
    out = rstar.copy()
    out[replaced] = r[replaced] + pred[replaced]
    return out, replaced, ()


# ---------------------------------------------------------------------------
# the grid driver


def _march(model, anchor, etas, lam_start, tol, r_stop):
    """Constrained fits along one side, warm starting from the neighbor.

    Stops once the signed root exceeds r_stop in magnitude (no point paying
    for grid values far beyond any interval endpoint) or after three
    consecutive failures.
    """
    rows = []
    lam = np.array(lam_start, dtype=float)
    misses = 0
    eta_hat = float(anchor.x_hat[0])
    for eta in etas:
        lam_hat, bundle, conv = constrained_fit(model, eta, lam, tol=tol)
        rows.append((eta, lam_hat, bundle, conv))
        if conv:
            lam = lam_hat
            misses = 0
            root = _signed_root(anchor.loglik - bundle.value, eta_hat - eta)
            if abs(root) >= r_stop:
                break
        else:
            misses += 1
            if misses >= 3:
                break
    return rows


def profile_model(
    model, x_hat, options: Optional[HoaOptions] = None, eta_grid=None
) -> ProfileTrace:
    """Full higher-order profile trace for an engine model.

    x_hat are engine coordinates of (a point near) the full MLE; it is
    re-polished here so the anchor is stationary to options.tol.  A fixed
    eta_grid replaces the adaptive grid when supplied (engine interest
    coordinates; the MLE point is always added).
    """
    opts = options or HoaOptions()
    flags = []
    anchor = _make_anchor(model, x_hat, opts.tol)

    for attempt in range(2):
        if eta_grid is not None:
            rows, grid_flags = _fixed_grid(model, anchor, opts, eta_grid)
        else:
            rows, grid_flags = _run_grid(model, anchor, opts)
        best = max(rows, key=lambda t: (t[2].value if t[2].in_support else -np.inf))
        tol_up = 1e-8 * (1.0 + abs(anchor.loglik))
        if best[2].value <= anchor.loglik + tol_up:
            break
        # a grid point beat the "global" fit: restart the anchor from it
        anchor = _make_anchor(model, np.concatenate(([best[0]], best[1])), opts.tol)
        flags.append("anchor_refit")
    else:
        flags.append("profile_exceeds_max")
    flags.extend(grid_flags)

    eta_hat = float(anchor.x_hat[0])
    rows.sort(key=lambda t: t[0])
    m = len(rows)
    p = model.p
    psi = np.array([t[0] for t in rows])
    nuis = np.full((m, p - 1), np.nan)
    loglik_p = np.full(m, np.nan)
    conv = np.zeros(m, dtype=bool)
    q = np.full(m, np.nan)
    sev_tem = np.full(m, np.nan)
    sev_cov = np.full(m, np.nan)
    for i, (eta, lam, bundle, ok) in enumerate(rows):
        conv[i] = ok
        if not ok:
            continue
        nuis[i] = lam
        loglik_p[i] = bundle.value
        row = _point_row(model, anchor, eta, lam, bundle)
        q[i] = row["q"]
        sev_tem[i] = row["sev_tem"]
        sev_cov[i] = row["sev_cov"]

    delta = anchor.loglik - loglik_p
    with np.errstate(invalid="ignore"):
        r = np.where(conv, np.sqrt(np.maximum(2.0 * delta, 0.0)), np.nan)
    r = r * np.sign(eta_hat - psi)
    rstar_raw = np.full(m, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        good = conv & np.isfinite(r) & np.isfinite(q) & (r * q > 0.0)
        rstar_raw[good] = r[good] + np.log(q[good] / r[good]) / r[good]

    if opts.stabilize:
        rstar, replaced, stab_flags = stabilize_root_trace(
            r, rstar_raw, opts.exclusion_r, opts.outlier_z
        )
        flags.extend(stab_flags)
    else:
        rstar, replaced = rstar_raw.copy(), np.zeros(m, dtype=bool)

    warm = _warm_start_fn(psi, nuis, conv)
    psi_m_tem, lhat_tem = _curve_max(psi, sev_tem)
    psi_m_tem, lhat_tem = _refine_sev_max(
        model, anchor, warm, "sev_tem", psi, psi_m_tem, lhat_tem, opts.tol
    )
    psi_m_cov, lhat_cov = _curve_max(psi, sev_cov)
    psi_m_cov, lhat_cov = _refine_sev_max(
        model, anchor, warm, "sev_cov", psi, psi_m_cov, lhat_cov, opts.tol
    )
    r_tem = _roots_from_curve(psi, sev_tem, psi_m_tem, lhat_tem)
    r_cov = _roots_from_curve(psi, sev_cov, psi_m_cov, lhat_cov)

    return ProfileTrace(
        psi=psi,
        loglik_p=loglik_p,
        nuisance=nuis,
        r=r,
        q=q,
        rstar_raw=rstar_raw,
        rstar=rstar,
        sev_tem=sev_tem,
        sev_cov=sev_cov,
        r_sev_tem=r_tem,
        r_sev_cov=r_cov,
        converged=conv,
        replaced=replaced,
        psi_hat=eta_hat,
        loglik_max=anchor.loglik,
        se_wald=anchor.se_eta,
        psi_hat_sev_tem=psi_m_tem,
        psi_hat_sev_cov=psi_m_cov,
        sev_tem_max=lhat_tem,
        sev_cov_max=lhat_cov,
        flags=tuple(dict.fromkeys(flags)),
        model=model,
        anchor=anchor,
    )


def _fixed_grid(model, anchor: _Anchor, opts: HoaOptions, eta_grid):
    """March outward over a user grid; no early stop, every point is fit."""
    eta_hat = float(anchor.x_hat[0])
    lam_hat = anchor.x_hat[1:]
    grid = np.unique(np.asarray(eta_grid, dtype=float))
    if grid.size == 0:
        raise ValueError("eta_grid is empty")
    rows = [(eta_hat, lam_hat.copy(), model.bundle(anchor.x_hat), True)]
    right = grid[grid > eta_hat]
    left = grid[grid < eta_hat][::-1]
    rows += _march(model, anchor, right, lam_hat, opts.tol, np.inf)
    rows += _march(model, anchor, left, lam_hat, opts.tol, np.inf)
    flags = []
    done = {t[0] for t in rows}
    if any(g not in done for g in grid):
        flags.append("grid_truncated")
    return rows, flags


def _run_grid(model, anchor: _Anchor, opts: HoaOptions):
    eta_hat = float(anchor.x_hat[0])
    lam_hat = anchor.x_hat[1:]
    se = anchor.se_eta
    if not (np.isfinite(se) and se > 0.0):
        raise RuntimeError("Wald standard error unavailable; cannot build the grid")
    lo_f, hi_f = model.feasible_interval()
    half = max((opts.grid_points - 1) // 2, 15)
    span = opts.span_se * se
    lo = eta_hat - span
    hi = eta_hat + span
    if np.isfinite(lo_f):
        lo = max(lo, lo_f + 1e-6 * (eta_hat - lo_f))
    if np.isfinite(hi_f):
        hi = min(hi, hi_f - 1e-6 * (hi_f - eta_hat))
    right = np.linspace(eta_hat, hi, half + 1)[1:]
    left = np.linspace(eta_hat, lo, half + 1)[1:]

    bundle_hat = model.bundle(anchor.x_hat)
    rows = [(eta_hat, lam_hat.copy(), bundle_hat, True)]
    step_r = right[1] - right[0] if right.size > 1 else span / half
    step_l = left[0] - left[1] if left.size > 1 else span / half

    def extend(side_rows, step, bound, sign):
        count = 0
        misses = 0
        last_eta = side_rows[-1][0] if side_rows else eta_hat
        lam = next((t[1] for t in reversed(side_rows) if t[3]), lam_hat)
        while count < opts.max_extend:
            conv_rows = [t for t in side_rows if t[3]]
            if conv_rows:
                eta_l, _, bundle_l, _ = conv_rows[-1]
                root = _signed_root(anchor.loglik - bundle_l.value, eta_hat - eta_l)
                if abs(root) >= opts.r_max:
                    return side_rows, False
            nxt = last_eta + sign * step
            if np.isfinite(bound) and (nxt >= bound if sign > 0 else nxt <= bound):
                return side_rows, True
            lam_n, bundle_n, conv_n = constrained_fit(model, nxt, lam, tol=opts.tol)
            side_rows.append((nxt, lam_n, bundle_n, conv_n))
            last_eta = nxt
            step *= opts.extend_growth  # flat tails need geometric reach
            if conv_n:
                lam, misses = lam_n, 0
            else:
                misses += 1
                if misses >= 3:
                    return side_rows, True
            count += 1
        return side_rows, True

    rows_r = _march(model, anchor, right, lam_hat, opts.tol, opts.r_max)
    rows_r, open_r = extend(rows_r, step_r, hi_f, +1.0)
    rows_l = _march(model, anchor, left, lam_hat, opts.tol, opts.r_max)
    rows_l, open_l = extend(rows_l, step_l, lo_f, -1.0)
    grid_flags = []
    if open_r:
        grid_flags.append("open_upper_grid")
    if open_l:
        grid_flags.append("open_lower_grid")
    return rows + rows_r + rows_l, grid_flags


# ---------------------------------------------------------------------------
# curve utilities: maxima, roots, intervals


def _finite_xy(x, y):
    mask = np.isfinite(x) & np.isfinite(y)
    return x[mask], y[mask]


def _curve_max(x, y):
    """Location and value of the maximum of a smooth curve sampled on x."""
    xs, ys = _finite_xy(x, y)
    if xs.size < 4:
        return float("nan"), float("nan")
    interp = PchipInterpolator(xs, ys, extrapolate=False)
    i = int(np.argmax(ys))
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, xs.size - 1)]
    if a == b:
        return float(xs[i]), float(ys[i])
    res = optimize.minimize_scalar(
        lambda t: -float(interp(t)), bounds=(a, b), method="bounded",
        options={"xatol": 1e-12 * (1.0 + abs(b - a))},
    )
    xm = float(res.x)
    return xm, float(interp(xm))


def _roots_from_curve(x, ell, x_max, ell_max):
    """Signed roots sqrt(2(max-ell)) with the sign of (x_max - x)."""
    if not np.isfinite(x_max):
        return np.full(x.shape, np.nan)
    with np.errstate(invalid="ignore"):
        out = np.sqrt(np.maximum(2.0 * (ell_max - ell), 0.0))
    return out * np.sign(x_max - x)


def _warm_start_fn(psi, nuisance, converged):
    xs = psi[converged]
    lams = nuisance[converged]

    def warm(eta):
        i = int(np.argmin(np.abs(xs - eta)))
        return lams[i]

    return warm


def _exact_sev_value(model, anchor, warm, name, tol=1e-9):
    """Pointwise modified-profile value; used for max refinement and roots."""

    def fn(eta):
        lam, bundle, ok = constrained_fit(model, eta, warm(eta), tol=tol)
        if not ok:
            return float("nan")
        return _point_row(model, anchor, eta, lam, bundle)[name]

    return fn


def _refine_sev_max(model, anchor, warm, name, psi, x0, ell0, tol):
    """Sharpen a curve maximum against the exact pointwise values.

    Grid interpolation alone leaves O(1e-7) wobble in the maximum, which
    breaks exact reparametrization invariance of the signed roots; a short
    bounded maximization of the true curve removes it.
    """
    if not np.isfinite(x0) or model is None:
        return x0, ell0
    xs = psi[np.isfinite(psi)]
    if xs.size < 3:
        return x0, ell0
    spacing = np.median(np.diff(np.sort(xs)))
    fn = _exact_sev_value(model, anchor, warm, name, tol)
    lo, hi = x0 - spacing, x0 + spacing
    try:
        res = optimize.minimize_scalar(
            lambda t: -fn(t), bounds=(lo, hi), method="bounded",
            options={"xatol": 1e-11 * (1.0 + abs(x0))},
        )
    except ValueError:
        return x0, ell0
    if not (np.isfinite(res.x) and np.isfinite(res.fun)):
        return x0, ell0
    return float(res.x), float(-res.fun)


def _crossing(psi, stat, target, side, center):
    """Bracket where the decreasing statistic crosses target, nearest center.

    side < 0 looks left of center (lower limit), side > 0 right of it.
    Returns (a, b) grid bracket or None.
    """
    xs, ys = _finite_xy(psi, stat)
    if xs.size < 2:
        return None
    g = ys - target
    hits = []
    for i in range(xs.size - 1):
        if g[i] == 0.0:
            hits.append((xs[i], xs[i]))
        elif g[i] * g[i + 1] < 0.0:
            hits.append((xs[i], xs[i + 1]))
    if g[-1] == 0.0:
        hits.append((xs[-1], xs[-1]))
    if side < 0:
        hits = [h for h in hits if h[0] <= center]
        return hits[-1] if hits else None
    hits = [h for h in hits if h[1] >= center]
    return hits[0] if hits else None


def _interp_root(psi, stat, target, bracket):
    xs, ys = _finite_xy(psi, stat)
    interp = PchipInterpolator(xs, ys, extrapolate=False)
    a, b = bracket
    if a == b:
        return float(a)
    return float(optimize.brentq(lambda t: float(interp(t)) - target, a, b, xtol=1e-13, rtol=1e-14))


def exact_statistic(trace: ProfileTrace, name: str):
    """Pointwise recomputation of a statistic, for endpoint polishing."""
    model, anchor = trace.model, trace.anchor
    if model is None or anchor is None:
        return None
    eta_hat = trace.psi_hat
    warm = _warm_start_fn(trace.psi, trace.nuisance, trace.converged)

    def r_fn(eta):
        lam, bundle, ok = constrained_fit(model, eta, warm(eta))
        if not ok:
            return float("nan")
        return _signed_root(anchor.loglik - bundle.value, eta_hat - eta)

    if name == "r":
        return r_fn
    if name == "rstar":

        def rstar_fn(eta):
            lam, bundle, ok = constrained_fit(model, eta, warm(eta))
            if not ok:
                return float("nan")
            rv = _signed_root(anchor.loglik - bundle.value, eta_hat - eta)
            row = _point_row(model, anchor, eta, lam, bundle)
            qv = row["q"]
            if not np.isfinite(qv) or qv * rv <= 0.0:
                return float("nan")
            return rv + math.log(qv / rv) / rv

        return rstar_fn
    if name in ("sev_tem", "sev_cov"):
        x_max = trace.psi_hat_sev_tem if name == "sev_tem" else trace.psi_hat_sev_cov
        ell_max = trace.sev_tem_max if name == "sev_tem" else trace.sev_cov_max
        value_fn = _exact_sev_value(model, anchor, warm, name)

        def sev_fn(eta):
            val = value_fn(eta)
            if not np.isfinite(val):
                return float("nan")
            return _signed_root(ell_max - val, x_max - eta)

        return sev_fn
    raise ValueError(f"unknown statistic {name!r}")


def confint(trace: ProfileTrace, statistic="rstar", level=0.95, polish=True) -> Interval:
    """Equi-tailed interval from a signed-root statistic trace."""
    z = norm.ppf(0.5 + level / 2.0)
    stat = trace.stat(statistic)
    center = trace.psi_hat
    flags = []
    exact = exact_statistic(trace, statistic) if polish else None
    out = []
    for target, side, tag in ((z, -1, "lower"), (-z, +1, "upper")):
        br = _crossing(trace.psi, stat, target, side, center)
        if br is None:
            flags.append(f"open_{tag}")
            out.append(-np.inf if side < 0 else np.inf)
            continue
        root = _interp_root(trace.psi, stat, target, br)
        if exact is not None:
            root = _polish_root(exact, target, root, br) or root
        out.append(root)
    return Interval(out[0], out[1], level, statistic, tuple(flags))


def _polish_root(fn, target, root, bracket):
    """Tighten an interpolated crossing against the exact statistic."""
    a, b = bracket
    width = max(b - a, 1e-8 * (1.0 + abs(root)))
    lo, hi = root - width, root + width
    fa, fb = fn(lo) - target, fn(hi) - target
    for _ in range(6):
        if np.isfinite(fa) and np.isfinite(fb) and fa * fb <= 0.0:
            break
        lo, hi = lo - width, hi + width
        fa, fb = fn(lo) - target, fn(hi) - target
    else:
        return None
    try:
        return float(
            optimize.brentq(
                lambda t: fn(t) - target, lo, hi,
                xtol=1e-12 * (1.0 + abs(root)), rtol=8.881784197001252e-16,
            )
        )
    except ValueError:
        return None


def point_estimate(trace: ProfileTrace, statistic="rstar") -> float:
    """Root of the statistic: psi_hat for R, the corrected estimate for R*."""
    if statistic == "r":
        return trace.psi_hat
    stat = trace.stat(statistic)
    br = _crossing(trace.psi, stat, 0.0, -1, np.inf)
    if br is None:
        raise ValueError(f"statistic {statistic!r} has no zero crossing on the grid")
    return _interp_root(trace.psi, stat, 0.0, br)


def analyze(y, spec: ModelSpec, transform=None, options=None):
    """Fit then profile in one call for the iid engine families.

    For family "gp" the data must already be excesses over spec.risk.u
    (strictly positive).  Returns (FitResult, ProfileTrace); the trace's
    interest coordinate is the risk value itself unless transform is given.
    """
    model = build_model(y, spec, transform)
    fit = fit_gev(y) if spec.family == "gev" else fit_gp(np.asarray(y, dtype=float))
    x_hat = model.eng_from_nat(fit.params)
    trace = profile_model(model, x_hat, options)
    return fit, trace


def wald_ci(psi_hat, se_psi, level=0.95, log_scale=True) -> Interval:
    """Wald limits, on the log scale when the estimate allows it."""
    z = norm.ppf(0.5 + level / 2.0)
    if log_scale and psi_hat > 0.0:
        h = z * se_psi / psi_hat
        return Interval(psi_hat * math.exp(-h), psi_hat * math.exp(h), level, "wald")
    return Interval(
        psi_hat - z * se_psi, psi_hat + z * se_psi, level, "wald",
        ("untransformed",) if log_scale else (),
    )
