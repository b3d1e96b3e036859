import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special, stats

from srpm.channel import (
    ChannelRealization,
    build_bs_ris_channel,
    draw_realization,
    make_rng,
    sample_rayleigh_channel,
    sample_von_mises,
    steering_vector,
    subsurface_gain_moments,
    sum_over_subsurfaces,
)
from srpm.config import SystemConfig


def test_steering_examples():
    np.testing.assert_allclose(steering_vector(4, 0.0, 0.5), np.ones(4))
    np.testing.assert_allclose(steering_vector(2, math.pi / 2, 0.5), [1, -1], atol=1e-15)
    np.testing.assert_allclose(steering_vector(3, math.pi / 6, 0.5), [1, 1j, -1], atol=1e-15)


@given(st.integers(1, 64), st.floats(-math.pi, math.pi), st.floats(0.1, 2.0))
def test_steering_unit_modulus(n, phi, spacing):
    a = steering_vector(n, phi, spacing)
    assert a.shape == (n,)
    np.testing.assert_allclose(np.abs(a), 1.0)


def test_bs_ris_small():
    np.testing.assert_allclose(build_bs_ris_channel(SystemConfig(N=1, Nt=1, L=1)), [[1]])
    np.testing.assert_allclose(build_bs_ris_channel(SystemConfig(N=2, Nt=2, L=1)), np.ones((2, 2)))


@given(st.integers(1, 40), st.integers(1, 12), st.floats(0.1, 3.0), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_bs_ris_rank_one(N, Nt, beta, pr, pt):
    G = build_bs_ris_channel(SystemConfig(N=N, Nt=Nt, L=1, beta=beta, phi_r=pr, phi_t=pt))
    sv = np.linalg.svd(G, compute_uv=False)
    assert sv[0] == pytest.approx(beta * math.sqrt(N * Nt), rel=1e-10)
    assert np.all(sv[1:] <= 1e-9 * sv[0])
    assert np.linalg.norm(G) == pytest.approx(beta * math.sqrt(N * Nt), rel=1e-10)


def test_rayleigh_moments():
    h = sample_rayleigh_channel(1_000_000, make_rng(1))
    assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, abs=0.01)
    assert np.mean(np.abs(h)) == pytest.approx(math.sqrt(math.pi) / 2, abs=0.01)
    # circular symmetry
    assert abs(np.mean(h**2)) < 0.01


def test_rayleigh_deterministic():
    a = sample_rayleigh_channel(16, make_rng(7, 3))
    b = sample_rayleigh_channel(16, make_rng(7, 3))
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, sample_rayleigh_channel(16, make_rng(7, 4)))


def test_von_mises_uniform_limit():
    x = sample_von_mises(0.0, make_rng(2), 1_000_000)
    assert abs(np.mean(np.exp(1j * x))) < 0.005
    assert np.all(x > -math.pi) and np.all(x <= math.pi)


def test_von_mises_bessel_ratio():
    x = sample_von_mises(10.0, make_rng(3), 1_000_000)
    r = abs(np.mean(np.exp(1j * x)))
    assert special.i1(10.0) / special.i0(10.0) == pytest.approx(0.9486, abs=1e-4)
    assert r == pytest.approx(special.i1(10.0) / special.i0(10.0), abs=0.005)


def test_von_mises_large_kappa_std():
    x = sample_von_mises(20.0, make_rng(4), 1_000_000)
    assert np.std(x) == pytest.approx(1 / math.sqrt(20), abs=0.01)


@pytest.mark.parametrize("kappa", [1e-7, 0.5, 2.0, 10.0, 300.0])
def test_von_mises_ks_against_scipy(kappa):
    x = sample_von_mises(kappa, make_rng(5, int(kappa * 10)), 100_000)
    res = stats.kstest(x, stats.vonmises(kappa).cdf)
    assert res.statistic < 0.01


def test_von_mises_deterministic_and_scalar():
    a = sample_von_mises(10.0, make_rng(9), (3, 4))
    b = sample_von_mises(10.0, make_rng(9), (3, 4))
    assert a.shape == (3, 4)
    np.testing.assert_array_equal(a, b)
    assert np.ndim(sample_von_mises(1.0, make_rng(1))) == 0


@given(st.integers(1, 6), st.integers(1, 8), st.integers(0, 2**32))
def test_realization_invariants(L, per, seed):
    cfg = SystemConfig(N=L * per, L=L)
    real = draw_realization(cfg, make_rng(seed))
    assert isinstance(real, ChannelRealization)
    np.testing.assert_allclose(real.alphas, np.abs(real.hr))
    assert np.all(real.h >= 0)
    assert real.h.sum() == pytest.approx(real.alphas.sum(), rel=1e-12)
    assert [len(a) for a in real.assignment] == [per] * L
    np.testing.assert_array_equal(np.concatenate(real.assignment), np.arange(cfg.N))
    for l, idx in enumerate(real.assignment):
        assert real.h[l] == pytest.approx(real.alphas[idx].sum(), rel=1e-12)


def test_clt_moments_of_h():
    N, L = 128, 2
    rng = make_rng(11)
    h = np.concatenate([sum_over_subsurfaces(np.abs(sample_rayleigh_channel((20_000, N), rng)), L) for _ in range(5)])
    mu, var = subsurface_gain_moments(N, L)
    assert mu == pytest.approx(math.sqrt(math.pi) * N / (2 * L))
    assert var == pytest.approx((4 - math.pi) * N / (4 * L))
    assert np.mean(h) == pytest.approx(mu, rel=0.01)
    assert np.var(h) == pytest.approx(var, rel=0.02)
