"""Maximum likelihood fitting for the extreme-value families.

Full fits run a derivative-free warm-up (Nelder-Mead on a penalized
objective) followed by guarded Newton steps on the analytic score and
observed information; the stationarity target is ||score||_inf below
tol*(1+|loglik|).  The GP fit first reduces to Grimshaw's one-dimensional
problem in eta = xi/tau and polishes in the native coordinates.  Shapes are
constrained to xi >= -1 throughout (the likelihood is unbounded beyond),
and fits with xi_hat <= -0.5 are flagged since the usual standard-error
theory fails there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from .families import GevParams, GpParams, gev_loglik, gp_loglik
from .kernels import EULER_GAMMA

XI_LOWER = -1.0
XI_NONREGULAR = -0.5


@dataclass
class FitResult:
    """A fitted family with curvature-based uncertainty summaries."""

    params: object
    loglik: float
    se: dict
    cov: Optional[np.ndarray]
    converged: bool
    n: int
    score_norm: float
    flags: tuple = field(default_factory=tuple)

    def se_of(self, name: str) -> float:
        return self.se.get(name, float("nan"))


def newton_maximize(fn, x0, tol=1e-9, max_iter=80):
    """Guarded ascent on fn(x) -> (value, grad, neg_hess, ok).

    Newton direction when the negative Hessian solves cleanly and gives an
    ascent direction, otherwise a scaled gradient step; backtracking keeps
    iterates inside the support.  Returns (x, value, grad, neg_hess,
    converged, iterations).
    """
    x = np.asarray(x0, dtype=float).copy()
    value, grad, nh, ok = fn(x)
    if not ok or not np.isfinite(value):
        return x, value, grad, nh, False, 0
    it = 0
    for it in range(1, max_iter + 1):
        gmax = float(np.max(np.abs(grad)))
        if gmax <= tol * (1.0 + abs(value)):
            return x, value, grad, nh, True, it - 1
        step = None
        try:
            cand = np.linalg.solve(nh, grad)
            if np.all(np.isfinite(cand)) and float(grad @ cand) > 0.0:
                step = cand
        except np.linalg.LinAlgError:
            step = None
        if step is None:
            scale = float(np.max(np.abs(np.diag(np.atleast_2d(nh)))))
            scale = scale if np.isfinite(scale) and scale > 0.0 else 1.0
            step = grad / scale
        t = 1.0
        accepted = False
        while t > 1e-14:
            x_new = x + t * step
            v_new, g_new, nh_new, ok_new = fn(x_new)
            if ok_new and np.isfinite(v_new) and v_new >= value - 1e-13 * (1.0 + abs(value)):
                # require progress: either a better value or a flatter score
                if v_new > value or float(np.max(np.abs(g_new))) < gmax:
                    x, value, grad, nh = x_new, v_new, g_new, nh_new
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            break
    gmax = float(np.max(np.abs(grad)))
    return x, value, grad, nh, gmax <= tol * (1.0 + abs(value)), it


def _nelder_warmup(value_fn, x0, max_iter=400):
    res = optimize.minimize(
        lambda x: -value_fn(x),
        np.asarray(x0, dtype=float),
        method="Nelder-Mead",
        options={"maxiter": max_iter, "xatol": 1e-10, "fatol": 1e-10},
    )
    return res.x


def _cov_and_se(nh, names):
    try:
        chol = np.linalg.cholesky(nh)
        inv = np.linalg.inv(nh)
    except np.linalg.LinAlgError:
        return None, {n: float("nan") for n in names}, False
    se = np.sqrt(np.maximum(np.diag(inv), 0.0))
    return inv, dict(zip(names, se.tolist())), True


# ---------------------------------------------------------------------------
# GEV


def _gev_fn(y):
    n = y.size

    def fn(x):
        mu, sigma, xi = x
        if sigma <= 0.0 or xi < XI_LOWER:
            return -np.inf, np.full(3, np.nan), np.full((3, 3), np.nan), False
        b = gev_loglik(y, GevParams(mu, sigma, xi))
        return b.value, b.score, b.obs_info, b.in_support

    return fn


def gev_moment_start(y) -> np.ndarray:
    s = float(np.std(y, ddof=1)) if y.size > 1 else 1.0
    sigma0 = max(math.sqrt(6.0) * s / math.pi, 1e-8 * (1.0 + abs(float(np.mean(y)))))
    mu0 = float(np.mean(y)) - EULER_GAMMA * sigma0
    return np.array([mu0, sigma0, 0.1])


def fit_gev(y, start=None, tol=1e-9) -> FitResult:
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.size < 3:
        raise ValueError("need at least 3 observations to fit a GEV")
    fn = _gev_fn(y)
    x0 = np.asarray(start, dtype=float) if start is not None else gev_moment_start(y)
    if not fn(x0)[3]:
        x0 = gev_moment_start(y)
        if not fn(x0)[3]:
            x0[2] = 0.0  # Gumbel start is always inside the support
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
    return FitResult(
        params=params,
        loglik=float(value),
        se=se,
        cov=cov,
        converged=converged,
        n=y.size,
        score_norm=float(np.max(np.abs(grad))),
        flags=tuple(flags),
    )


# ---------------------------------------------------------------------------
# GP (excesses over a threshold, support y > 0)


def _gp_fn(y):
    def fn(x):
        tau, xi = x
        if tau <= 0.0 or xi < XI_LOWER:
            return -np.inf, np.full(2, np.nan), np.full((2, 2), np.nan), False
        b = gp_loglik(y, GpParams(tau, xi))
        return b.value, b.score, b.obs_info, b.in_support

    return fn


def _grimshaw_candidates(y):
    """Profile the GP likelihood over eta = xi/tau on a one-dimensional grid.

    For each eta the inner maximum has xi(eta) = mean(log1p(eta*y)) and
    profile value -n*(log(xi/eta) + xi + 1); candidates with xi < -1 are
    inadmissible (unbounded-likelihood region).
    """
    n, m, ymax = y.size, float(np.mean(y)), float(np.max(y))
    lo = -1.0 / ymax
    neg = lo * (1.0 - np.logspace(-12, -0.01, 80))
    pos = np.logspace(-10, 8, 120) / m
    etas = np.concatenate([neg, pos])
    best = (-np.inf, (m, 0.0))  # exponential limit eta -> 0
    l0 = -n * (math.log(m) + 1.0)
    if l0 > best[0]:
        best = (l0, (m, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        xis = np.mean(np.log1p(etas[:, None] * y[None, :]), axis=1)
        lstar = -n * (np.log(xis / etas) + xis + 1.0)
    ok = np.isfinite(lstar) & (xis >= XI_LOWER) & (xis / etas > 0.0)
    if np.any(ok):
        i = int(np.argmax(np.where(ok, lstar, -np.inf)))
        if lstar[i] > best[0]:
            best = (float(lstar[i]), (float(xis[i] / etas[i]), float(xis[i])))
    return best[1]


def fit_gp(y, start=None, tol=1e-9) -> FitResult:
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.size < 2:
        raise ValueError("need at least 2 exceedances to fit a GP")
    if np.any(y <= 0.0):
        raise ValueError("GP fitting expects positive excesses over the threshold")
    fn = _gp_fn(y)
    x0 = np.asarray(start, dtype=float) if start is not None else np.asarray(
        _grimshaw_candidates(y), dtype=float
    )
    if not fn(x0)[3]:
        x0 = np.array([float(np.mean(y)), 0.0])
    x, value, grad, nh, converged, _ = newton_maximize(fn, x0, tol=tol)
    if not converged:
        x1 = _nelder_warmup(lambda z: fn(z)[0] if fn(z)[3] else -1e12, x)
        x, value, grad, nh, converged, _ = newton_maximize(fn, x1, tol=tol)
    params = GpParams(*x)
    flags = []
    ymax = float(np.max(y))
    near_support_edge = params.xi < 0.0 and (1.0 + params.xi * ymax / params.tau) < 1e-8
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
        n=y.size,
        score_norm=float(np.max(np.abs(grad))),
        flags=tuple(flags),
    )


def fit_mle(spec, data, **kw) -> FitResult:
    """Family dispatch used by the batch front end (iid families)."""
    if spec.family == "gev":
        return fit_gev(data, **kw)
    if spec.family == "gp":
        y = np.asarray(data, dtype=float) - spec.u
        return fit_gp(y[y > 0.0] if np.any(y <= 0.0) else y, **kw)
    raise ValueError(
        f"family {spec.family!r} has a dedicated fitting entry point in its module"
    )


# ---------------------------------------------------------------------------
# constrained (profile) fits in engine coordinates


def constrained_fit(model, eta, lam0, tol=1e-9, max_iter=60):
    """max_lam loglik(eta, lam); returns (lam_hat, bundle, converged).

    The bundle is the full engine-coordinate bundle at the solution, so the
    caller can read off both the profile value and the nuisance information
    block without re-evaluating.
    """
    lam0 = np.atleast_1d(np.asarray(lam0, dtype=float))
    if lam0.size == 0:
        bundle = model.bundle(np.array([eta]))
        return lam0, bundle, bool(bundle.in_support)
    cache = {}

    def fn(lam):
        key = lam.tobytes()
        if key not in cache:
            cache[key] = model.bundle(np.concatenate(([eta], lam)))
        b = cache[key]
        if not b.in_support:
            p = lam.size
            return -np.inf, np.full(p, np.nan), np.full((p, p), np.nan), False
        return b.value, b.score[1:], b.obs_info[1:, 1:], True

    lam, value, grad, _, converged, _ = newton_maximize(fn, lam0, tol=tol, max_iter=max_iter)
    if not converged and np.isfinite(value):
        lam1 = _nelder_warmup(lambda z: fn(np.atleast_1d(z))[0], lam, max_iter=200)
        lam, value, grad, _, converged, _ = newton_maximize(
            fn, np.atleast_1d(lam1), tol=tol, max_iter=max_iter
        )
    bundle = model.bundle(np.concatenate(([eta], lam)))
    return lam, bundle, bool(converged and bundle.in_support)
