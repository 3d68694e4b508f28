"""Truncated/censored lifetime likelihoods, endpoint profiles, bootstrap.

Oracles: exact reduction to the plain GP likelihood when nothing is
truncated or censored, a direct per-record construction of the conditional
densities with independent numpy expressions, finite differences for score
and information, the probability-integral transform of the conditional
sampling law, a 500-replicate coverage run for the endpoint interval, and
the chi-square(1) law of the squared likelihood root for the bootstrap
p-value curve.
"""

import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from evrisk.families import GpParams, gp_loglik
from evrisk.ltrc import (
    LifetimeRecord,
    LtrcData,
    LtrcModel,
    as_ltrc_data,
    bootstrap_pvalue_curve,
    endpoint_profile,
    exponential_survival_ci,
    fit_ltrc,
    fit_ltrc_exponential,
    load_records,
    ltrc_gp_loglik,
    raise_threshold,
    simulate_ltrc,
    survival_prob_exponential,
)
from evrisk.fit import constrained_fit
from evrisk.profile import confint
from evrisk.risk import RiskSpec, constrain_params, risk_value

from fdtools import fd_grad, fd_hess

TRUTH = GpParams(1.8, -0.2)  # excess-lifetime limit 9.0


def _ltrc_sample(seed, n=150, params=TRUTH, p_trunc=0.4, p_cens=0.3):
    """Mixed design: some subjects left-truncated, some censored."""
    rng = np.random.default_rng(seed)
    v = np.where(rng.uniform(size=n) < p_trunc, rng.uniform(0.0, 1.5, n), 0.0)
    hz = np.where(
        rng.uniform(size=n) < p_cens, v + rng.uniform(0.5, 3.0, n), np.inf
    )
    return simulate_ltrc(params, v, hz, rng)


def _direct_loglik(data, params):
    """Per-record conditional densities from scratch: no kernel code."""
    tau, xi = params.tau, params.xi

    def logS(t):
        if xi == 0.0:
            return -t / tau
        arg = 1.0 + xi * t / tau
        if arg <= 0.0:
            return -math.inf
        return -math.log(arg) / xi

    def logf(t):
        if xi == 0.0:
            return -math.log(tau) - t / tau
        arg = 1.0 + xi * t / tau
        if arg <= 0.0:
            return -math.inf
        return -math.log(tau) - (1.0 / xi + 1.0) * math.log(arg)

    total = 0.0
    for t, v, a in zip(data.t, data.v, data.a):
        obs = logS(float(t)) if a else logf(float(t))
        total += obs - logS(float(v))
    return total


# ---------------------------------------------------------------------------
# records, ingestion, re-thresholding


class TestRecords:
    def test_validation(self):
        with pytest.raises(ValueError):
            LifetimeRecord(-0.1)
        with pytest.raises(ValueError):
            LifetimeRecord(1.0, trunc=-0.5)
        with pytest.raises(ValueError):
            LifetimeRecord(float("nan"))

    def test_censored_at_zero_is_legal(self):
        r = LifetimeRecord(0.0, censored=True)
        b = ltrc_gp_loglik([r, LifetimeRecord(1.0)], GpParams(1.5, -0.1))
        assert b.in_support
        # the zero record contributes nothing: log S(0) = 0
        assert b.per_obs_scores[0] == pytest.approx([0.0, 0.0], abs=0.0)

    def test_array_roundtrip(self):
        recs = [LifetimeRecord(1.0, 0.2, True), LifetimeRecord(2.5)]
        d = as_ltrc_data(recs)
        assert d.n == 2
        assert d.records() == recs
        assert as_ltrc_data(d) is d

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            as_ltrc_data([])

    def test_csv_roundtrip(self, tmp_path):
        p = tmp_path / "rec.csv"
        p.write_text(
            "excess,trunc,censored\n1.25,0.5,1\n2.0,0,false\n0.0,0,yes\n"
        )
        recs = load_records(p)
        assert recs == [
            LifetimeRecord(1.25, 0.5, True),
            LifetimeRecord(2.0, 0.0, False),
            LifetimeRecord(0.0, 0.0, True),
        ]

    def test_csv_days_converted(self, tmp_path):
        p = tmp_path / "rec.csv"
        p.write_text("excess,trunc,censored\n730.5,365.25,0\n")
        (r,) = load_records(p, time_unit="days")
        assert r.excess == pytest.approx(2.0, abs=1e-12)
        assert r.trunc == pytest.approx(1.0, abs=1e-12)

    def test_csv_optional_columns(self, tmp_path):
        p = tmp_path / "rec.csv"
        p.write_text("excess\n1.5\n2.5\n")
        recs = load_records(p)
        assert recs == [LifetimeRecord(1.5), LifetimeRecord(2.5)]

    def test_csv_errors(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("size\n1.0\n")
        with pytest.raises(ValueError):
            load_records(bad)
        flag = tmp_path / "flag.csv"
        flag.write_text("excess,censored\n1.0,maybe\n")
        with pytest.raises(ValueError):
            load_records(flag)
        with pytest.raises(ValueError):
            load_records(tmp_path / "rec.csv", time_unit="weeks")

    def test_raise_threshold(self):
        recs = [
            LifetimeRecord(2.0, 0.8, False),
            LifetimeRecord(0.4, 0.2, True),   # never reaches u + 0.5
            LifetimeRecord(0.5, 0.0, True),   # censored exactly at u'
            LifetimeRecord(0.5, 0.0, False),  # died exactly at u': drops
            LifetimeRecord(0.7, 0.6, False),
        ]
        out = raise_threshold(recs, 0.5)
        expect = [(1.5, 0.3, False), (0.0, 0.0, True), (0.2, 0.1, False)]
        assert [(r.excess, r.trunc, r.censored) for r in out] == [
            (pytest.approx(e, abs=1e-15), pytest.approx(v, abs=1e-15), a)
            for e, v, a in expect
        ]
        assert all(r.trunc <= r.excess or r.censored for r in out)
        assert raise_threshold(recs, 0.0) == recs
        with pytest.raises(ValueError):
            raise_threshold(recs, -0.1)


# ---------------------------------------------------------------------------
# likelihood algebra


class TestLoglik:
    def test_reduces_to_plain_gp(self):
        rng = np.random.default_rng(7)
        y = rng.gamma(2.0, 1.5, size=40)
        recs = [LifetimeRecord(float(t)) for t in y]
        for params in (GpParams(2.2, -0.12), GpParams(1.0, 0.3), GpParams(1.7, 0.0)):
            a = ltrc_gp_loglik(recs, params)
            b = gp_loglik(y, params)
            assert abs(a.value - b.value) < 1e-12
            np.testing.assert_allclose(a.score, b.score, rtol=0, atol=1e-12)
            np.testing.assert_allclose(a.obs_info, b.obs_info, rtol=1e-12, atol=1e-12)
            np.testing.assert_allclose(
                a.per_obs_scores, b.per_obs_scores, rtol=0, atol=1e-12
            )

    def test_matches_direct_construction(self):
        data = _ltrc_sample(3, n=60)
        for params in (GpParams(1.8, -0.2), GpParams(2.4, -0.05), GpParams(1.5, 0.1)):
            b = ltrc_gp_loglik(data, params)
            direct = _direct_loglik(data, params)
            assert abs(b.value - direct) < 1e-12 * (1.0 + abs(direct))

    def test_score_and_info_match_fd(self):
        data = _ltrc_sample(11, n=120)
        th = np.array([1.6, -0.15])
        b = ltrc_gp_loglik(data, GpParams(*th))

        def f(x):
            return ltrc_gp_loglik(data, GpParams(*x)).value

        g = fd_grad(f, th)
        assert np.max(np.abs(b.score - g) / (1.0 + np.abs(g))) < 1e-5
        H = fd_hess(f, th)
        assert np.max(np.abs(-b.obs_info - H) / (1.0 + np.abs(H))) < 1e-3

    def test_per_record_rows_are_gradients(self):
        data = _ltrc_sample(5, n=8)
        params = GpParams(1.9, -0.18)
        b = ltrc_gp_loglik(data, params)
        np.testing.assert_array_equal(b.per_obs_scores.sum(axis=0), b.score)
        for i in range(data.n):
            one = LtrcData(data.t[i : i + 1], data.v[i : i + 1], data.a[i : i + 1])

            def f(x):
                return ltrc_gp_loglik(one, GpParams(*x)).value

            g = fd_grad(f, np.array([params.tau, params.xi]))
            np.testing.assert_allclose(
                b.per_obs_scores[i], g, rtol=1e-5, atol=1e-7
            )

    def test_support_violation(self):
        params = GpParams(1.0, -0.25)  # endpoint at 4
        bad_obs = ltrc_gp_loglik([LifetimeRecord(4.5)], params)
        assert not bad_obs.in_support and bad_obs.value == -np.inf
        bad_trunc = ltrc_gp_loglik(
            [LifetimeRecord(3.9, trunc=4.2, censored=True)], params
        )
        assert not bad_trunc.in_support

    def test_censoring_consistency(self):
        # under a small-limit model, pushing a censored record upward can
        # only lose likelihood: log S decreases in t
        params = GpParams(1.0, -0.25)
        base = [LifetimeRecord(1.0), LifetimeRecord(2.0)]
        vals = [
            ltrc_gp_loglik(base + [LifetimeRecord(e, censored=True)], params).value
            for e in (0.5, 1.5, 2.5, 3.5, 3.9)
        ]
        assert all(x > y for x, y in zip(vals, vals[1:]))

    @given(
        tau=st.floats(0.5, 5.0),
        xi=st.floats(-0.45, 0.5),
        seed=st.integers(0, 2**30),
    )
    @settings(max_examples=60, deadline=None)
    def test_rows_sum_exactly(self, tau, xi, seed):
        params = GpParams(tau, xi)
        rng = np.random.default_rng(seed)
        v = np.where(rng.uniform(size=12) < 0.5, rng.uniform(0, 0.4, 12) * tau, 0.0)
        data = simulate_ltrc(params, v, np.full(12, 2.0 * tau), rng)
        b = ltrc_gp_loglik(data, params)
        assert b.in_support
        np.testing.assert_array_equal(b.per_obs_scores.sum(axis=0), b.score)
        assert np.isfinite(b.value)


# ---------------------------------------------------------------------------
# conditional simulator


class TestSimulate:
    def test_probability_integral_transform(self):
        rng = np.random.default_rng(23)
        params = GpParams(1.8, -0.2)
        v = rng.uniform(0.0, 2.0, size=4000)
        sim = simulate_ltrc(params, v, np.inf, rng)
        assert np.all(sim.t > sim.v)
        # S(t)/S(v) should be standard uniform
        wt = 1.0 + params.xi * sim.t / params.tau
        wv = 1.0 + params.xi * sim.v / params.tau
        ratio = (wt / wv) ** (-1.0 / params.xi)
        assert stats.kstest(ratio, "uniform").pvalue > 0.01

    def test_exponential_branch(self):
        rng = np.random.default_rng(29)
        sim = simulate_ltrc(GpParams(2.0, 0.0), np.full(3000, 0.7), np.inf, rng)
        assert stats.kstest((sim.t - 0.7) / 2.0, "expon").pvalue > 0.01

    def test_censoring_applied(self):
        rng = np.random.default_rng(31)
        hz = np.full(500, 1.2)
        sim = simulate_ltrc(GpParams(1.8, -0.2), np.zeros(500), hz, rng)
        assert np.all(sim.t[sim.a] == 1.2)
        assert np.all(sim.t[~sim.a] < 1.2)
        assert 0 < sim.a.sum() < 500

    def test_truncation_beyond_support(self):
        with pytest.raises(ValueError):
            simulate_ltrc(
                GpParams(1.0, -0.5), np.array([2.5]), np.inf,
                np.random.default_rng(0),
            )


# ---------------------------------------------------------------------------
# fitting


class TestFit:
    def test_recovers_truth(self):
        data = _ltrc_sample(41, n=250)
        fit = fit_ltrc(data)
        assert fit.converged
        assert abs(fit.params.tau - TRUTH.tau) < 4.0 * fit.se["tau"]
        assert abs(fit.params.xi - TRUTH.xi) < 4.0 * fit.se["xi"]
        assert fit.score_norm < 1e-6 * (1.0 + abs(fit.loglik))

    def test_start_override(self):
        data = _ltrc_sample(43, n=80)
        a = fit_ltrc(data)
        b = fit_ltrc(data, start=(2.5, 0.1))
        assert abs(a.loglik - b.loglik) < 1e-6

    def test_too_few_records(self):
        with pytest.raises(ValueError):
            fit_ltrc([LifetimeRecord(1.0)])

    def test_exponential_closed_form(self):
        recs = [
            LifetimeRecord(2.0, 0.5, False),
            LifetimeRecord(1.0, 0.0, True),
            LifetimeRecord(3.0, 1.0, False),
        ]
        fit = fit_ltrc_exponential(recs)
        expo = (2.0 - 0.5) + 1.0 + (3.0 - 1.0)
        assert fit.params.tau == pytest.approx(expo / 2.0, abs=1e-15)
        assert fit.loglik == pytest.approx(
            -2.0 * math.log(expo / 2.0) - 2.0, abs=1e-12
        )
        assert fit.se["tau"] == pytest.approx(fit.params.tau / math.sqrt(2.0), abs=1e-15)

    def test_exponential_needs_a_death(self):
        with pytest.raises(ValueError):
            fit_ltrc_exponential([LifetimeRecord(1.0, censored=True)])

    def test_exponential_recovery(self):
        rng = np.random.default_rng(47)
        v = np.where(rng.uniform(size=400) < 0.3, rng.uniform(0, 1, 400), 0.0)
        hz = np.where(rng.uniform(size=400) < 0.3, v + rng.uniform(1, 4, 400), np.inf)
        sim = simulate_ltrc(GpParams(1.8, 0.0), v, hz, rng)
        fit = fit_ltrc_exponential(sim)
        assert abs(fit.params.tau - 1.8) < 4.0 * fit.se["tau"]


# ---------------------------------------------------------------------------
# endpoint interest map


class TestEndpointMap:
    def test_mapping_exact(self):
        spec = RiskSpec(kind="endpoint", u=0.0)
        p = constrain_params(10.0, [-0.1], spec, "ltrc")
        assert p == GpParams(1.0, -0.1)
        assert risk_value(GpParams(1.0, -0.1), spec, "ltrc") == 10.0

    def test_roundtrip_with_offset(self):
        spec = RiskSpec(kind="endpoint", u=105.0)
        model = LtrcModel([LifetimeRecord(1.0), LifetimeRecord(2.0)], spec)
        params = GpParams(1.22, -0.08)
        x = model.eng_from_nat(params)
        assert x[0] == pytest.approx(105.0 + 1.22 / 0.08, rel=1e-15)
        back = model.nat(x)
        assert back.tau == pytest.approx(params.tau, rel=1e-14)
        assert back.xi == params.xi

    def test_positive_shape_infeasible(self):
        spec = RiskSpec(kind="endpoint", u=0.0)
        model = LtrcModel([LifetimeRecord(1.0), LifetimeRecord(2.0)], spec)
        assert model.nat(np.array([10.0, 0.05])) is None


# ---------------------------------------------------------------------------
# endpoint profile


@pytest.fixture(scope="module")
def neg_shape_sample():
    return _ltrc_sample(61, n=250, params=GpParams(1.8, -0.25))


@pytest.fixture(scope="module")
def neg_shape_trace(neg_shape_sample):
    return endpoint_profile(neg_shape_sample)


class TestEndpointProfile:
    def test_anchor_matches_fit(self, neg_shape_sample, neg_shape_trace):
        fit = fit_ltrc(neg_shape_sample)
        iota_hat = -fit.params.tau / fit.params.xi
        assert neg_shape_trace.psi_hat == pytest.approx(iota_hat, rel=1e-6)

    def test_intervals_bracket(self, neg_shape_sample, neg_shape_trace):
        fit = fit_ltrc(neg_shape_sample)
        iota_hat = -fit.params.tau / fit.params.xi
        tmax = float(np.max(neg_shape_sample.t))
        for statistic in ("r", "rstar", "sev_cov"):
            ci = confint(neg_shape_trace, statistic)
            assert ci.lower < iota_hat < ci.upper
            assert ci.lower > tmax
        # corrections move the interval
        a = confint(neg_shape_trace, "r")
        b = confint(neg_shape_trace, "rstar")
        assert abs(a.lower - b.lower) + abs(min(a.upper, 1e9) - min(b.upper, 1e9)) > 1e-4

    def test_engine_derivatives_match_fd(self, neg_shape_sample):
        fit = fit_ltrc(neg_shape_sample)
        spec = RiskSpec(kind="endpoint", u=0.0)
        model = LtrcModel(neg_shape_sample, spec)
        x = model.eng_from_nat(fit.params) + np.array([0.4, -0.03])
        b = model.bundle(x)

        def f(z):
            return model.bundle(z).value

        g = fd_grad(f, x)
        assert np.max(np.abs(b.score - g) / (1.0 + np.abs(g))) < 1e-4
        H = fd_hess(f, x)
        assert np.max(np.abs(-b.obs_info - H) / (1.0 + np.abs(H))) < 5e-4

    def test_pivot_directions_match_fd(self, neg_shape_sample):
        # V = -F_theta / F_t for the conditional-on-truncation cdf, at the MLE
        fit = fit_ltrc(neg_shape_sample)
        spec = RiskSpec(kind="endpoint", u=0.0)
        model = LtrcModel(neg_shape_sample, spec)
        x_hat = model.eng_from_nat(fit.params)
        V = model.V(x_hat)
        d = model.data

        def cond_cdf(t, v, x):
            p = model.nat(x)
            st_ = (1.0 + p.xi * t / p.tau) ** (-1.0 / p.xi)
            sv = (1.0 + p.xi * v / p.tau) ** (-1.0 / p.xi)
            return 1.0 - st_ / sv

        for i in (0, 3, 17, d.n - 1):
            F_th = fd_grad(lambda z: cond_cdf(d.t[i], d.v[i], z), x_hat)
            h = 1e-6 * (1.0 + abs(d.t[i]))
            F_t = (
                cond_cdf(d.t[i] + h, d.v[i], x_hat)
                - cond_cdf(d.t[i] - h, d.v[i], x_hat)
            ) / (2.0 * h)
            np.testing.assert_allclose(V[i], -F_th / F_t, rtol=1e-5, atol=1e-8)

    def test_fixed_grid_honored(self, neg_shape_sample, neg_shape_trace):
        lo = float(np.max(neg_shape_sample.t)) * 1.05
        grid = np.linspace(lo, 3.0 * lo, 21)
        tr = endpoint_profile(neg_shape_sample, iota_grid=grid)
        assert np.all(np.isin(np.round(grid, 9), np.round(tr.psi, 9)))
        assert tr.psi_hat == pytest.approx(neg_shape_trace.psi_hat, rel=1e-9)

    def test_total_age_offset(self, neg_shape_sample, neg_shape_trace):
        tr = endpoint_profile(neg_shape_sample, u=105.0)
        assert tr.psi_hat == pytest.approx(neg_shape_trace.psi_hat + 105.0, rel=1e-9)
        a = confint(neg_shape_trace, "r")
        b = confint(tr, "r")
        assert b.lower == pytest.approx(a.lower + 105.0, abs=2e-3)

    def test_positive_shape_flagged_open(self):
        # shape estimate barely positive: finite limits up to some point are
        # still rejected, beyond it compatible, upper limit open
        rng = np.random.default_rng(84)
        sim = simulate_ltrc(GpParams(1.5, 0.05), np.zeros(150), np.inf, rng)
        fit = fit_ltrc(sim)
        assert fit.params.xi > 0.0
        tr = endpoint_profile(sim)
        assert "no_finite_endpoint_mle" in tr.flags
        assert tr.psi_hat == np.inf
        assert np.all(np.isnan(tr.rstar))
        ci = confint(tr, "r")
        assert ci.upper == np.inf and "open_upper" in ci.flags
        assert np.isfinite(ci.lower) and ci.lower > float(np.max(sim.t))

    def test_strongly_positive_shape_rejects_all_limits(self):
        # decisive positive shape: r exceeds the 95% cutoff at every finite
        # limit, so no crossing exists on either side
        rng = np.random.default_rng(83)
        sim = simulate_ltrc(GpParams(1.5, 0.25), np.zeros(150), np.inf, rng)
        tr = endpoint_profile(sim)
        assert np.nanmin(tr.r) > stats.norm.ppf(0.975)
        ci = confint(tr, "r")
        assert set(ci.flags) == {"open_lower", "open_upper"}

    def test_grid_below_data_rejected(self):
        rng = np.random.default_rng(89)
        sim = simulate_ltrc(GpParams(1.5, 0.25), np.zeros(60), np.inf, rng)
        with pytest.raises(ValueError):
            endpoint_profile(sim, iota_grid=[float(np.max(sim.t)) * 0.5])

    def test_first_order_coverage(self):
        # two-sided 95% likelihood-root interval: truth covered iff
        # |r(iota_true)| < z, one constrained fit per replicate
        z = stats.norm.ppf(0.975)
        truth = GpParams(1.8, -0.2)
        iota_true = 9.0
        spec = RiskSpec(kind="endpoint", u=0.0)
        root = np.random.SeedSequence(20260814)
        hit = 0
        used = 0
        for child in root.spawn(500):
            rng = np.random.default_rng(child)
            v = np.where(rng.uniform(size=200) < 0.3, rng.uniform(0, 1.5, 200), 0.0)
            hz = np.where(
                rng.uniform(size=200) < 0.25, v + rng.uniform(0.5, 3, 200), np.inf
            )
            sim = simulate_ltrc(truth, v, hz, rng)
            if float(np.max(sim.t)) >= iota_true:
                continue  # truth outside the feasible grid: never covered
            fit = fit_ltrc(sim)
            if not fit.converged:
                continue
            model = LtrcModel(sim, spec)
            _, bundle, ok = constrained_fit(
                model, iota_true, np.array([min(fit.params.xi, -1e-3)])
            )
            if not ok:
                continue
            used += 1
            if 2.0 * (fit.loglik - bundle.value) < z**2:
                hit += 1
        assert used > 450
        cover = hit / used
        se = math.sqrt(0.95 * 0.05 / used)
        assert abs(cover - 0.95) < 3.5 * se + 0.005


# ---------------------------------------------------------------------------
# bootstrap p-value curve


@pytest.fixture(scope="module")
def boot_sample():
    # complete, well-specified data so the chi-square law should hold
    rng = np.random.default_rng(101)
    return simulate_ltrc(GpParams(1.8, -0.25), np.zeros(90), np.inf, rng)


@pytest.fixture(scope="module")
def boot_curve(boot_sample):
    fit = fit_ltrc(boot_sample)
    iota_hat = -fit.params.tau / fit.params.xi
    grid = np.concatenate([[iota_hat * 1.001], iota_hat * np.array([1.3, 1.8, 2.6, 4.0])])
    return bootstrap_pvalue_curve(boot_sample, grid, B=299, seed=17)


class TestBootstrap:
    def test_validation(self, boot_sample):
        with pytest.raises(ValueError):
            bootstrap_pvalue_curve(boot_sample, [20.0], B=99)
        with pytest.raises(ValueError):
            bootstrap_pvalue_curve(
                boot_sample, [float(np.max(boot_sample.t)) * 0.9], B=199
            )

    def test_pvalue_near_one_at_mle(self, boot_curve):
        assert boot_curve.r2[0] < 1e-4
        assert boot_curve.pvalue[0] > 0.9
        assert boot_curve.pvalue_chi2[0] > 0.99

    def test_chi2_agreement(self, boot_curve):
        p = np.clip(boot_curve.pvalue_chi2, 1.0 / boot_curve.B, None)
        se = np.sqrt(p * (1.0 - p) / boot_curve.B)
        gap = np.abs(boot_curve.pvalue - boot_curve.pvalue_chi2)
        assert np.all(gap < 3.0 * se + 2.0 / boot_curve.B)

    def test_monotone_decreasing_with_noise_band(self, boot_curve):
        p = boot_curve.pvalue
        se = np.sqrt(np.clip(p * (1 - p), 0.25 / boot_curve.B, None) / boot_curve.B)
        for i in range(p.size - 1):
            assert p[i + 1] <= p[i] + 3.0 * (se[i] + se[i + 1])

    def test_bookkeeping(self, boot_curve):
        assert boot_curve.n_failed.dtype.kind == "i"
        assert np.all(boot_curve.n_failed <= 0.1 * boot_curve.B)
        assert np.isfinite(boot_curve.iota_hat)
        assert np.all(np.isfinite(boot_curve.pvalue))

    def test_deterministic(self, boot_sample):
        g = [12.0, 16.0]
        a = bootstrap_pvalue_curve(boot_sample, g, B=199, seed=3)
        b = bootstrap_pvalue_curve(boot_sample, g, B=199, seed=3)
        np.testing.assert_array_equal(a.pvalue, b.pvalue)
        np.testing.assert_array_equal(a.r2, b.r2)


# ---------------------------------------------------------------------------
# exponential submodel


class TestExponentialSurvival:
    def test_trivial_values(self):
        assert survival_prob_exponential(1.4, years=0.0) == 1.0
        assert survival_prob_exponential(1.0 / math.log(2.0)) == pytest.approx(
            0.5, abs=1e-15
        )

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            survival_prob_exponential(0.0)
        with pytest.raises(ValueError):
            survival_prob_exponential(-1.0)
        with pytest.raises(ValueError):
            survival_prob_exponential(1.0, years=-0.5)

    def test_ci_brackets_and_orders(self):
        rng = np.random.default_rng(107)
        v = np.where(rng.uniform(size=120) < 0.4, rng.uniform(0, 1, 120), 0.0)
        hz = np.where(rng.uniform(size=120) < 0.4, v + rng.uniform(0.5, 2, 120), np.inf)
        sim = simulate_ltrc(GpParams(1.5, 0.0), v, hz, rng)
        est, (lo, hi) = exponential_survival_ci(sim)
        fit = fit_ltrc_exponential(sim)
        assert est == pytest.approx(math.exp(-1.0 / fit.params.tau), abs=1e-15)
        assert 0.0 < lo < est < hi < 1.0
        _, (lo99, hi99) = exponential_survival_ci(sim, level=0.99)
        assert lo99 < lo and hi99 > hi


# ---------------------------------------------------------------------------
# published analysis (needs the user-supplied lifetime table)

ITALIAN = Path(__file__).resolve().parents[1] / "data" / "italian_lifetimes.csv"
needs_data = pytest.mark.skipif(
    not ITALIAN.exists(),
    reason="semi-supercentenarian table not distributed; place the CSV "
    "(columns excess, trunc, censored; excess life above 105 years) at "
    "data/italian_lifetimes.csv",
)


@needs_data
class TestItalianLifetimes:
    """Excess lifetimes above 105 years, window 2009-2016."""

    def _records(self, u_offset):
        recs = load_records(ITALIAN)
        return raise_threshold(recs, u_offset)

    def test_fit_at_110(self):
        recs = self._records(5.0)
        fit = fit_ltrc(recs)
        assert fit.n == 88
        assert fit.params.tau == pytest.approx(1.22, abs=0.005)
        assert fit.params.xi == pytest.approx(0.12, abs=0.005)
        assert fit.se["tau"] == pytest.approx(0.23, abs=0.005)
        assert fit.se["xi"] == pytest.approx(0.17, abs=0.005)
        assert fit.loglik == pytest.approx(-85.4, abs=0.05)

    def test_endpoint_intervals_at_105(self):
        recs = self._records(0.0)
        tr = endpoint_profile(recs, u=105.0)
        r_ci = confint(tr, "r")
        rs_ci = confint(tr, "rstar")
        assert r_ci.lower == pytest.approx(128.5, abs=0.1)
        assert r_ci.upper == pytest.approx(213.7, abs=0.1)
        assert rs_ci.lower == pytest.approx(129.3, abs=0.1)
        assert rs_ci.upper == pytest.approx(235.3, abs=0.1)

    def test_survival_at_110(self):
        recs = self._records(5.0)
        est, (lo, hi) = exponential_survival_ci(recs)
        assert est == pytest.approx(0.476, abs=0.005)
        assert lo == pytest.approx(0.416, abs=0.01)
        assert hi == pytest.approx(0.537, abs=0.01)
