"""Kernel derivatives against arbitrary-precision oracles."""

import mpmath as mp
import numpy as np
import pytest

from evrisk.kernels import EULER_GAMMA, GumbelMeanKappa, PowerKappa, shape_kernels

mp.mp.dps = 40


def mp_A(z, xi):
    if xi == 0:
        return mp.mpf(z)
    return mp.log(1 + mp.mpf(xi) * z) / mp.mpf(xi)


XI_GRID = [-0.45, -0.2, -0.05, -1e-3, -2e-5, -1e-6, 0.0, 1e-6, 2e-5, 1e-3, 0.1, 0.4, 0.9]
Z_GRID = [-1.8, -0.6, -0.05, 0.2, 1.0, 4.5, 30.0]


@pytest.mark.parametrize("xi", XI_GRID)
def test_shape_kernels_match_mpmath(xi):
    zs = [z for z in Z_GRID if 1.0 + xi * z > 1e-8]
    k = shape_kernels(np.array(zs), xi)
    for i, z in enumerate(zs):
        a = mp_A(z, xi)
        a_z = mp.diff(lambda t: mp_A(t, xi), mp.mpf(z))
        a_zz = mp.diff(lambda t: mp_A(t, xi), mp.mpf(z), 2)
        # xi-derivatives at fixed z, via high-precision numerical diff
        a_x = mp.diff(lambda s: mp_A(z, s), mp.mpf(xi))
        a_xx = mp.diff(lambda s: mp_A(z, s), mp.mpf(xi), 2)
        a_zx = mp.diff(lambda s: mp.diff(lambda t: mp_A(t, s), mp.mpf(z)), mp.mpf(xi))
        assert abs(k.A[i] - float(a)) <= 1e-12 * max(1.0, abs(float(a)))
        assert abs(k.A_z[i] - float(a_z)) <= 1e-11 * max(1.0, abs(float(a_z)))
        assert abs(k.A_zz[i] - float(a_zz)) <= 1e-11 * max(1.0, abs(float(a_zz)))
        assert abs(k.A_x[i] - float(a_x)) <= 1e-9 * max(1.0, abs(float(a_x)))
        assert abs(k.A_zx[i] - float(a_zx)) <= 1e-9 * max(1.0, abs(float(a_zx)))
        assert abs(k.A_xx[i] - float(a_xx)) <= 1e-8 * max(1.0, abs(float(a_xx)))


def test_shape_kernels_support_mask():
    k = shape_kernels(np.array([-3.0, 1.0]), 0.5)
    assert not k.ok[0] and k.ok[1]
    assert np.isnan(k.A[0]) and np.isfinite(k.A[1])


def test_series_branch_continuity():
    # values straddling the series switch must agree smoothly
    z = np.array([0.3, 2.0, 8.0])
    lo = shape_kernels(z, 9.9e-5)
    hi = shape_kernels(z, 1.01e-4)
    assert np.allclose(lo.A_x, hi.A_x, rtol=1e-4)
    assert np.allclose(lo.A_xx, hi.A_xx, rtol=1e-3)


@pytest.mark.parametrize("L", [0.05, 1.0, 3.4, 9.1])
@pytest.mark.parametrize("xi", XI_GRID)
def test_power_kappa_match_mpmath(L, xi):
    pk = PowerKappa(L)

    def h_mp(s):
        if s == 0:
            return mp.mpf(L)
        return (mp.exp(mp.mpf(s) * L) - 1) / mp.mpf(s)

    x = mp.mpf(xi) if xi != 0.0 else mp.mpf("1e-30")
    h_ref = float(h_mp(x))
    dh_ref = float(mp.diff(h_mp, x))
    d2h_ref = float(mp.diff(h_mp, x, 2))
    assert abs(pk.h(xi) - h_ref) <= 1e-10 * max(1.0, abs(h_ref))
    assert abs(pk.dh(xi) - dh_ref) <= 1e-8 * max(1.0, abs(dh_ref))
    assert abs(pk.d2h(xi) - d2h_ref) <= 1e-7 * max(1.0, abs(d2h_ref))


@pytest.mark.parametrize("logT", [0.0, np.log(10.0), np.log(300.0)])
@pytest.mark.parametrize("xi", [-0.4, -0.1, -1e-5, 0.0, 1e-5, 0.15, 0.6])
def test_gumbel_mean_kappa_match_mpmath(logT, xi):
    gk = GumbelMeanKappa(logT)

    def h_mp(s):
        return (mp.exp(mp.mpf(s) * logT) * mp.gamma(1 - mp.mpf(s)) - 1) / mp.mpf(s)

    x = mp.mpf(xi) if xi != 0.0 else mp.mpf("1e-30")
    h_ref = float(h_mp(x))
    dh_ref = float(mp.diff(h_mp, x))
    d2h_ref = float(mp.diff(h_mp, x, 2))
    assert abs(gk.h(xi) - h_ref) <= 1e-9 * max(1.0, abs(h_ref))
    assert abs(gk.dh(xi) - dh_ref) <= 1e-7 * max(1.0, abs(dh_ref))
    assert abs(gk.d2h(xi) - d2h_ref) <= 1e-6 * max(1.0, abs(d2h_ref))


def test_gumbel_mean_kappa_limit():
    gk = GumbelMeanKappa(np.log(50.0))
    assert gk.h(0.0) == pytest.approx(np.log(50.0) + EULER_GAMMA, rel=1e-14)


def test_euler_gamma_value():
    assert EULER_GAMMA == pytest.approx(float(mp.euler), abs=1e-19)
