"""Engine tests: reparametrization chains, fitting, profiles, corrections.

Oracles: finite differences for every analytic derivative chain, a
brute-force nuisance grid for the profile value, implicit-function finite
differences of the data-space pivots for V, the closed-form pivot of the
one-parameter exponential model for Q, and exact gamma tail probabilities
for the corrected root.  Interest-transform invariance is checked by
rerunning entire analyses under psi -> log psi.
"""

import math

import numpy as np
import pytest
from scipy import optimize, stats

from evrisk.families import (
    GevParams,
    GpParams,
    gev_cdf,
    gev_rvs,
    gp_cdf,
    gp_rvs,
)
from evrisk.fit import constrained_fit, fit_gev, fit_gp, newton_maximize
from evrisk.models import (
    ExpMeanModel,
    GevModel,
    GevRiskMap,
    GpModel,
    GpRiskMap,
    ModelSpec,
)
from evrisk.profile import (
    HoaOptions,
    ProfileTrace,
    analyze,
    confint,
    exact_statistic,
    point_estimate,
    profile_model,
    stabilize_root_trace,
    wald_ci,
)
from evrisk.risk import RiskSpec, risk_value

from fdtools import fd_grad, fd_hess, fd_jac

Z95 = stats.norm.ppf(0.975)


# ---------------------------------------------------------------------------
# shared fixtures: one GP and one GEV analysis reused across tests


@pytest.fixture(scope="module")
def gp_case():
    rng = np.random.default_rng(7)
    y = gp_rvs(GpParams(1.0, 0.1), 60, rng)
    spec = ModelSpec(
        family="gp",
        risk=RiskSpec(kind="tmax_mean", T=450, zeta_u=1.0, N_y=1.0, u=0.0),
    )
    fit, trace = analyze(y, spec)
    return y, spec, fit, trace


@pytest.fixture(scope="module")
def gev_case():
    rng = np.random.default_rng(19)
    y = gev_rvs(GevParams(0.0, 1.0, 0.1), 60, rng)
    spec = ModelSpec(family="gev", risk=RiskSpec(kind="return_level", T=100))
    fit, trace = analyze(y, spec)
    return y, spec, fit, trace


# ---------------------------------------------------------------------------
# reparametrization maps


GEV_SPECS = [
    RiskSpec(kind="return_level", T=50),
    RiskSpec(kind="tmax_quantile", T=20, p=0.5),
    RiskSpec(kind="tmax_mean", T=80),
    RiskSpec(kind="prob_exceed", z=4.0),
]
GP_SPECS = [
    RiskSpec(kind="gp_tmax_quantile", p=0.5, T=50, N_y=2.0, zeta_u=0.05, u=1.5),
    RiskSpec(kind="tmax_mean", T=100, N_y=1.0, zeta_u=0.5, u=0.0),
    RiskSpec(kind="return_level", T=200, N_y=1.0, zeta_u=0.25, u=2.0),
    RiskSpec(kind="endpoint", u=1.0),
]


def _nat_vec(mapper, x):
    params = mapper.nat(x)
    assert params is not None
    return params.as_array()


@pytest.mark.parametrize("spec", GEV_SPECS, ids=lambda s: s.kind)
@pytest.mark.parametrize("transform", [None, "log"])
def test_gev_map_derivatives(spec, transform):
    mapper = GevRiskMap(spec, "gev", transform)
    params = GevParams(2.0, 1.3, 0.12 if spec.kind != "prob_exceed" else -0.08)
    x0 = mapper.eng_from_nat(params)
    J, H = mapper.jac_hess(x0)
    J_fd = fd_jac(lambda x: _nat_vec(mapper, x), x0)
    assert np.max(np.abs(J - J_fd)) < 1e-5 * (1.0 + np.max(np.abs(J)))
    for k in range(3):
        H_fd = fd_hess(lambda x: _nat_vec(mapper, x)[k], x0)
        assert np.max(np.abs(H[k] - H_fd)) < 2e-4 * (1.0 + np.max(np.abs(H[k])))
    # pinning round trip: the reconstructed natives reproduce the risk value
    back = mapper.nat(x0)
    assert back.mu == pytest.approx(params.mu, rel=1e-9)


@pytest.mark.parametrize("spec", GP_SPECS, ids=lambda s: s.kind)
@pytest.mark.parametrize("transform", [None, "log"])
def test_gp_map_derivatives(spec, transform):
    mapper = GpRiskMap(spec, "gp", transform)
    params = GpParams(1.4, -0.15 if spec.kind == "endpoint" else 0.1)
    x0 = mapper.eng_from_nat(params)
    J, H = mapper.jac_hess(x0)
    J_fd = fd_jac(lambda x: _nat_vec(mapper, x), x0)
    assert np.max(np.abs(J - J_fd)) < 1e-5 * (1.0 + np.max(np.abs(J)))
    for k in range(2):
        H_fd = fd_hess(lambda x: _nat_vec(mapper, x)[k], x0)
        assert np.max(np.abs(H[k] - H_fd)) < 2e-4 * (1.0 + np.max(np.abs(H[k])))
    back = mapper.nat(x0)
    assert back.tau == pytest.approx(params.tau, rel=1e-9)


def test_engine_bundle_matches_fd(gp_case, gev_case):
    for case, off in ((gp_case, np.array([0.4, 0.03])), (gev_case, np.array([0.3, 0.05, 0.02]))):
        y, spec, fit, trace = case
        model = trace.model
        x = trace.anchor.x_hat + off
        b = model.bundle(x)
        assert b.in_support
        g_fd = fd_grad(lambda t: model.bundle(t).value, x)
        assert np.max(np.abs(b.score - g_fd)) < 1e-4 * (1.0 + np.max(np.abs(b.score)))
        h_fd = fd_hess(lambda t: model.bundle(t).value, x)
        assert np.max(np.abs(b.obs_info + h_fd)) < 5e-3 * (1.0 + np.max(np.abs(b.obs_info)))
        assert np.allclose(b.per_obs_scores.sum(axis=0), b.score, rtol=1e-9, atol=1e-9)


# ---------------------------------------------------------------------------
# fitting


class TestFit:
    def test_gev_stationarity(self, gev_case):
        y, spec, fit, trace = gev_case
        assert fit.converged
        assert fit.score_norm < 1e-6 * (1.0 + abs(fit.loglik))
        assert fit.se["sigma"] > 0 and np.isfinite(fit.se["xi"])

    def test_gp_stationarity(self, gp_case):
        y, spec, fit, trace = gp_case
        assert fit.converged
        assert fit.score_norm < 1e-6 * (1.0 + abs(fit.loglik))

    def test_gp_matches_multistart(self, gp_case):
        y, spec, fit, trace = gp_case
        # direct 2-D Newton from scattered starts never beats the Grimshaw fit
        from evrisk.fit import _gp_fn

        fn = _gp_fn(np.asarray(y))
        for tau0, xi0 in [(0.5, 0.3), (2.0, -0.2), (1.0, 0.0), (3.0, 0.5)]:
            x, value, *_ = newton_maximize(fn, np.array([tau0, xi0]))
            assert value <= fit.loglik + 1e-7 * (1.0 + abs(fit.loglik))

    def test_gp_degenerate_two_points(self):
        res = fit_gp(np.array([1.0, 2.0]))
        assert "shape_lower_bound" in res.flags
        assert not res.converged

    def test_gp_small_sample_shape_skew(self):
        # exponential-tail data at n=20: the shape estimate skews negative
        rng = np.random.default_rng(99)
        xis = []
        for _ in range(200):
            res = fit_gp(rng.exponential(1.0, size=20))
            if res.converged:
                xis.append(res.params.xi)
        assert np.median(xis) < -0.02

    def test_gev_needs_data(self):
        with pytest.raises(ValueError):
            fit_gev(np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            fit_gp(np.array([1.0, -2.0, 3.0]))


# ---------------------------------------------------------------------------
# profile value against a brute-force nuisance grid


def test_profile_matches_grid_search():
    rng = np.random.default_rng(5)
    y = gev_rvs(GevParams(0.0, 1.0, 0.1), 25, rng)
    spec = ModelSpec(family="gev", risk=RiskSpec(kind="return_level", T=50))
    model = GevModel(y, spec)
    fit = fit_gev(y)
    x_hat = model.eng_from_nat(fit.params)
    psi0 = float(x_hat[0]) + 0.8
    lam, bundle, ok = constrained_fit(model, psi0, x_hat[1:])
    assert ok
    # two-stage zoom grid over (sigma, xi)
    lo = np.array([0.3, -0.6])
    hi = np.array([3.0, 0.9])
    best_val, best_lam = -np.inf, None
    for _ in range(3):
        sg = np.linspace(lo[0], hi[0], 60)
        xg = np.linspace(lo[1], hi[1], 60)
        for s in sg:
            for xi in xg:
                v = model.bundle(np.array([psi0, s, xi])).value
                if v > best_val:
                    best_val, best_lam = v, (s, xi)
        ds, dx = sg[1] - sg[0], xg[1] - xg[0]
        lo = np.array([best_lam[0] - 2 * ds, best_lam[1] - 2 * dx])
        hi = np.array([best_lam[0] + 2 * ds, best_lam[1] + 2 * dx])
    assert bundle.value >= best_val - 1e-9
    assert bundle.value == pytest.approx(best_val, abs=1e-6)


# ---------------------------------------------------------------------------
# sample-space directions V


def _fd_pivot_direction(cdf, y0, theta_hat, make_params, k, h):
    """dy/dtheta_k holding the cdf pivot fixed, by central differences."""
    target = cdf(np.array([y0]), make_params(theta_hat))[0]

    def solve(theta):
        params = make_params(theta)
        lo = hi = None
        f = lambda t: cdf(np.array([t]), params)[0] - target
        span = 0.5 * (1.0 + abs(y0))
        lo, hi = y0 - span, y0 + span
        while f(lo) > 0:
            lo -= span
        while f(hi) < 0:
            hi += span
        return optimize.brentq(f, lo, hi, xtol=1e-13, rtol=1e-14)

    tp = theta_hat.copy()
    tp[k] += h
    tm = theta_hat.copy()
    tm[k] -= h
    return (solve(tp) - solve(tm)) / (2.0 * h)


class TestSampleSpaceDirections:
    def test_gp_interest_column_closed_form(self, gp_case):
        y, spec, fit, trace = gp_case
        model, anchor = trace.model, trace.anchor
        V = model.V(anchor.x_hat)
        psi_hat = anchor.x_hat[0]
        assert np.allclose(V[:, 0], np.asarray(y) / (psi_hat - spec.risk.u), rtol=1e-10)

    def test_gp_shape_column_closed_form(self):
        # quantile risk: the published shape column in (kappa_p, xi) coordinates
        rng = np.random.default_rng(2)
        y = gp_rvs(GpParams(1.0, 0.1), 40, rng)
        spec = ModelSpec(
            family="gp",
            risk=RiskSpec(kind="gp_tmax_quantile", p=0.5, T=50, N_y=2.0, zeta_u=1.0, u=0.0),
        )
        fit, trace = analyze(y, spec)
        model, anchor = trace.model, trace.anchor
        V = model.V(anchor.x_hat)
        tau, xi = fit.params.tau, fit.params.xi
        mtot = spec.risk.compound_horizon()
        q = 1.0 - 0.5 ** (1.0 / mtot)
        r = 1.0 + xi * np.asarray(y) / tau
        v_xi = tau * r * (np.log(r) / xi**2 + np.asarray(y) * np.log(q) / (tau * r * (1.0 - q**xi)))
        assert np.allclose(V[:, 1], v_xi, rtol=1e-8)

    def test_interest_column_instantiation(self):
        # y = 30, threshold 27, fitted risk 148 -> direction 30/121
        spec = ModelSpec(
            family="gp",
            risk=RiskSpec(kind="gp_tmax_quantile", p=0.5, T=50, N_y=5.2, zeta_u=0.5, u=27.0),
        )
        model = GpModel(np.array([30.0]), spec)
        x_hat = np.array([148.0, 0.1])
        V = model.V(x_hat)
        assert V[0, 0] == pytest.approx(30.0 / 121.0, rel=1e-12)

    def test_gp_pivot_fd(self, gp_case):
        y, spec, fit, trace = gp_case
        theta = np.array([fit.params.tau, fit.params.xi])
        z = np.asarray(y) / fit.params.tau
        from evrisk.kernels import shape_kernels

        k = shape_kernels(z, fit.params.xi)
        V_nat = np.column_stack([z, -fit.params.tau * k.w * k.A_x])
        for i in (0, 10, 30):
            for c, h in ((0, 1e-5), (1, 1e-6)):
                fd = _fd_pivot_direction(
                    gp_cdf, float(np.asarray(y)[i]), theta, lambda t: GpParams(*t), c, h
                )
                assert fd == pytest.approx(V_nat[i, c], rel=1e-5)

    def test_gev_pivot_fd_and_location_ones(self, gev_case):
        y, spec, fit, trace = gev_case
        p = fit.params
        theta = np.array([p.mu, p.sigma, p.xi])
        z = (np.asarray(y) - p.mu) / p.sigma
        from evrisk.kernels import shape_kernels

        k = shape_kernels(z, p.xi)
        V_nat = np.column_stack([np.ones(z.size), z, -p.sigma * k.w * k.A_x])
        assert np.all(V_nat[:, 0] == 1.0)
        for i in (3, 25):
            for c in (0, 1, 2):
                fd = _fd_pivot_direction(
                    gev_cdf, float(np.asarray(y)[i]), theta, lambda t: GevParams(*t), c, 1e-5
                )
                assert fd == pytest.approx(V_nat[i, c], rel=1e-5)


# ---------------------------------------------------------------------------
# trace-level invariants


class TestTrace:
    def test_root_zero_at_mle(self, gp_case):
        *_, trace = gp_case
        i = int(np.argmin(np.abs(trace.psi - trace.psi_hat)))
        assert trace.psi[i] == trace.psi_hat
        assert trace.r[i] == 0.0
        assert trace.q[i] == 0.0

    def test_profile_below_max(self, gp_case):
        *_, trace = gp_case
        ok = trace.converged
        assert np.all(trace.loglik_p[ok] <= trace.loglik_max + 1e-8)

    def test_root_squares_to_deviance(self, gp_case):
        *_, trace = gp_case
        ok = trace.converged
        dev = 2.0 * (trace.loglik_max - trace.loglik_p[ok])
        assert np.max(np.abs(trace.r[ok] ** 2 - np.maximum(dev, 0.0))) < 1e-10 * (
            1.0 + np.max(np.abs(dev))
        )

    def test_q_sign_matches_r_near_center(self, gp_case):
        *_, trace = gp_case
        near = np.abs(trace.r) < 1.5
        near &= trace.psi != trace.psi_hat
        assert np.all(np.sign(trace.q[near]) == np.sign(trace.r[near]))

    def test_statistics_decreasing(self, gp_case):
        *_, trace = gp_case
        ok = trace.converged & np.isfinite(trace.rstar)
        assert np.all(np.diff(trace.r[trace.converged]) < 0)
        assert np.all(np.diff(trace.rstar[ok]) < 0)

    def test_intervals_nested_and_contain_estimate(self, gp_case):
        *_, trace = gp_case
        for s in ("r", "sev_tem", "sev_cov"):
            ci = confint(trace, s, 0.95, polish=False)
            assert ci.lower < trace.psi_hat < ci.upper
        ci = confint(trace, "rstar", 0.95, polish=False)
        est = point_estimate(trace, "rstar")
        assert ci.lower < est < ci.upper
        wide = confint(trace, "r", 0.99, polish=False)
        tight = confint(trace, "r", 0.90, polish=False)
        assert wide.lower < tight.lower < tight.upper < wide.upper

    def test_corrected_interval_right_of_profile(self, gp_case):
        # heavy-tail risk: the corrected interval sits to the right
        *_, trace = gp_case
        a = confint(trace, "r", 0.95, polish=False)
        b = confint(trace, "rstar", 0.95, polish=False)
        assert b.lower > a.lower and b.upper > a.upper

    def test_profile_interval_matches_deviance_cut(self, gp_case):
        *_, trace = gp_case
        ci = confint(trace, "r", 0.95, polish=True)
        f = exact_statistic(trace, "r")
        assert abs(f(ci.lower)) == pytest.approx(Z95, abs=1e-7)
        assert abs(f(ci.upper)) == pytest.approx(Z95, abs=1e-7)

    def test_point_estimates(self, gp_case):
        *_, trace = gp_case
        assert point_estimate(trace, "r") == trace.psi_hat
        assert point_estimate(trace, "rstar") > trace.psi_hat


# ---------------------------------------------------------------------------
# stabilization


def _mk_rd(n=101):
    r = np.linspace(-3.5, 3.5, n)
    d = 0.05 + 0.02 * r - 0.004 * r**2 + 0.001 * r**3
    return r, r + d


class TestStabilize:
    def test_clean_trace_nearly_untouched(self):
        r, rstar = _mk_rd()
        out, replaced, flags = stabilize_root_trace(r, rstar)
        assert flags == ()
        assert np.max(np.abs(out - rstar)) < 1e-6

    def test_nan_near_zero_interpolated(self):
        r, rstar = _mk_rd()
        i = np.argmin(np.abs(r))
        rstar[i] = np.nan
        out, replaced, _ = stabilize_root_trace(r, rstar)
        assert np.isfinite(out[i]) and replaced[i]

    def test_spike_removed_others_kept(self):
        r, rstar = _mk_rd(201)
        clean = rstar.copy()
        i = np.argmin(np.abs(r - 0.5))
        rstar[i] += 0.5
        out, replaced, _ = stabilize_root_trace(r, rstar)
        assert replaced[i]
        assert abs(out[i] - clean[i]) < 1e-3
        others = ~replaced
        assert np.max(np.abs(out[others] - clean[others])) < 1e-12

    def test_too_few_points_passthrough(self):
        r = np.linspace(-1, 1, 6)
        rstar = r + 0.1
        out, replaced, flags = stabilize_root_trace(r, rstar)
        assert "stabilize_skipped" in flags
        assert np.array_equal(out, rstar)


# ---------------------------------------------------------------------------
# interval extraction on constructed traces


def _stub_trace(psi, stat):
    m = psi.size
    nanv = np.full(m, np.nan)
    return ProfileTrace(
        psi=psi,
        loglik_p=nanv,
        nuisance=np.zeros((m, 1)),
        r=stat,
        q=nanv,
        rstar_raw=stat,
        rstar=stat,
        sev_tem=nanv,
        sev_cov=nanv,
        r_sev_tem=nanv,
        r_sev_cov=nanv,
        converged=np.ones(m, dtype=bool),
        replaced=np.zeros(m, dtype=bool),
        psi_hat=float(psi[np.argmin(np.abs(stat))]),
        loglik_max=0.0,
        se_wald=1.0,
        psi_hat_sev_tem=float("nan"),
        psi_hat_sev_cov=float("nan"),
    )


class TestConfintMechanics:
    def test_exact_grid_point_returned(self):
        psi = np.linspace(0.0, 4.0, 41)
        stat = 2.0 - psi  # hits +Z at psi = 2 - Z, zero at 2.0
        tr = _stub_trace(psi, stat)
        ci = confint(tr, "r", 0.95, polish=False)
        assert ci.lower == pytest.approx(2.0 - Z95, abs=1e-12)
        assert ci.upper == pytest.approx(2.0 + Z95, abs=1e-12)

    def test_known_root_recovery(self):
        psi = np.linspace(0.0, 4.0, 81)
        root = 2.34567891
        tr = _stub_trace(psi, 3.0 * (root - psi))
        est = point_estimate(tr, "rstar")
        assert est == pytest.approx(root, abs=1e-10)
        # mildly curved statistic: interpolation alone stays within grid error
        tr2 = _stub_trace(psi, 3.0 * np.tanh(root - psi))
        assert point_estimate(tr2, "rstar") == pytest.approx(root, abs=1e-4)

    def test_open_interval_flagged(self):
        psi = np.linspace(0.0, 1.0, 21)
        stat = 0.5 - psi  # never reaches +-1.96
        tr = _stub_trace(psi, stat)
        ci = confint(tr, "r", 0.95, polish=False)
        assert ci.lower == -np.inf and ci.upper == np.inf
        assert set(ci.flags) == {"open_lower", "open_upper"}


class TestWald:
    def test_log_scale_arithmetic(self):
        ci = wald_ci(148.0, 0.2 * 148.0, 0.95, log_scale=True)
        assert ci.lower == pytest.approx(100.0, abs=0.1)
        assert ci.upper == pytest.approx(219.0, abs=0.1)

    def test_degenerate_se(self):
        ci = wald_ci(5.0, 0.0, 0.95)
        assert ci.astuple() == (5.0, 5.0)

    def test_nonpositive_estimate_falls_back(self):
        ci = wald_ci(-1.0, 0.5, 0.95, log_scale=True)
        assert "untransformed" in ci.flags
        assert ci.lower == pytest.approx(-1.0 - Z95 * 0.5)


# ---------------------------------------------------------------------------
# invariance under interest-preserving reparametrization


class TestInvariance:
    def test_likelihood_statistics_map_exactly(self, gp_case):
        y, spec, fit, trace = gp_case
        fit2, trace2 = analyze(y, spec, transform="log")
        for s in ("r", "rstar", "sev_tem", "sev_cov"):
            a = confint(trace, s, 0.95, polish=True)
            b = confint(trace2, s, 0.95, polish=True)
            assert abs(math.log(a.lower) - b.lower) < 1e-6 * abs(b.lower)
            assert abs(math.log(a.upper) - b.upper) < 1e-6 * abs(b.upper)

    def test_wald_is_not_invariant(self, gp_case):
        y, spec, fit, trace = gp_case
        fit2, trace2 = analyze(y, spec, transform="log")
        plain = wald_ci(trace.psi_hat, trace.se_wald, 0.95, log_scale=False)
        logscale = wald_ci(trace2.psi_hat, trace2.se_wald, 0.95, log_scale=False)
        assert abs(math.log(plain.upper) - logscale.upper) > 1e-2


# ---------------------------------------------------------------------------
# the exponential-mean toy model: closed-form pivot and exact tail match


@pytest.fixture(scope="module")
def toy():
    rng = np.random.default_rng(11)
    y = rng.exponential(2.0, size=15)
    model = ExpMeanModel(y)
    trace = profile_model(model, model.eng_from_nat(float(np.mean(y))))
    return y, model, trace


class TestExponentialToy:
    def test_q_equals_wald_type_statistic(self, toy):
        y, model, trace = toy
        psi_hat, n = float(np.mean(y)), y.size
        mask = trace.converged & (trace.psi != trace.psi_hat)
        q_exact = math.sqrt(n) * (psi_hat - trace.psi[mask]) / trace.psi[mask]
        assert np.max(np.abs(trace.q[mask] - q_exact)) < 1e-8

    def test_penalties_vanish_without_nuisance(self, toy):
        y, model, trace = toy
        ok = trace.converged
        assert np.allclose(trace.r_sev_tem[ok], trace.r[ok], atol=1e-9)
        assert np.allclose(trace.r_sev_cov[ok], trace.r[ok], atol=1e-9)

    def test_corrected_root_matches_gamma(self, toy):
        y, model, trace = toy
        n, S = y.size, float(np.sum(y))
        f = exact_statistic(trace, "rstar")
        for p in (0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99):
            psi_p = S / stats.gamma.ppf(p, a=n)
            assert stats.norm.cdf(f(psi_p)) == pytest.approx(p, abs=1e-3)

    def test_bundle_fd(self, toy):
        y, model, trace = toy
        x = np.array([2.3])
        b = model.bundle(x)
        g_fd = fd_grad(lambda t: model.bundle(t).value, x)
        assert b.score[0] == pytest.approx(g_fd[0], rel=1e-6)
