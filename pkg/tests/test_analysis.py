import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats as sstats

from srpm.analysis import (
    EnumerationCapError,
    PairStats,
    apep,
    apep_from_stats,
    cpep,
    diversity_order_estimate,
    dominant_pair,
    gain_moments,
    link_gain,
    log_mgf_lambda,
    mgf_lambda,
    mgf_single_subsurface,
    pair_stats,
    q_approx,
    q_function,
    single_subsurface_crosscheck,
    union_bound_aber,
)
from srpm.channel import make_rng, sample_rayleigh_channel, sum_over_subsurfaces
from srpm.config import SystemConfig, db_to_linear
from srpm.modem import codebook_for

cplx = st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False)


def _stats(m, C):
    return PairStats(m=np.asarray(m, float), C=np.asarray(C, float), singular=False)


def inverse_form_literal(t, m, C):
    """Printed nonsingular form, with the explicit inverse of C."""
    I = np.eye(2)
    A = I - 2 * t * C
    expo = -0.5 * m @ (I - np.linalg.inv(A)) @ np.linalg.inv(C) @ m
    return np.linalg.det(A) ** -0.5 * np.exp(expo)


def test_moments_default():
    g = gain_moments(128, 2)
    assert g.mu == pytest.approx(32 * math.sqrt(math.pi)) and g.mu == pytest.approx(56.7175, abs=1.5e-3)
    assert g.var == pytest.approx(16 * (4 - math.pi)) and g.var == pytest.approx(13.7345, abs=1e-4)
    assert g.var_imag == 0


def test_moments_against_monte_carlo():
    rng = make_rng(17)
    a = np.concatenate([np.abs(sample_rayleigh_channel((100_000, 64), rng)).sum(axis=1) for _ in range(10)])
    g = gain_moments(128, 2)
    assert a.mean() == pytest.approx(g.mu, rel=0.01)
    assert a.var() == pytest.approx(g.var, rel=0.01)


@pytest.mark.parametrize("b", [1, 2, 4])
def test_quantized_moments_against_monte_carlo(b):
    rng = make_rng(23, b)
    alpha = np.abs(sample_rayleigh_channel((200_000, 32), rng))
    w = math.pi / 2**b
    q = rng.uniform(-w, w, alpha.shape)
    h = (alpha * np.exp(1j * q)).sum(axis=1)
    g = gain_moments(64, 2, b)
    assert h.real.mean() == pytest.approx(g.mu, rel=0.01)
    assert h.real.var() == pytest.approx(g.var, rel=0.03)
    assert h.imag.var() == pytest.approx(g.var_imag, rel=0.03)


def test_pair_stats_real_L1():
    st_ = pair_stats(np.array([1.5]), np.array([0.25]), 64, 1)
    g = gain_moments(64, 1)
    dr = 1.25
    np.testing.assert_allclose(st_.C, [[dr**2 * g.var, 0], [0, 0]])
    assert st_.singular
    assert st_.c == pytest.approx(dr**2) and st_.mu_x == pytest.approx(g.mu) and st_.sigma_x2 == pytest.approx(g.var)


@pytest.mark.parametrize("L", [1, 2, 3, 5])
def test_pair_stats_appendix_case(L):
    dth = 3 * math.pi / 16
    st_ = pair_stats(np.full(L, np.exp(1j * dth)), np.full(L, np.exp(-1j * dth)), 16 * L, L)
    assert st_.m[0] == pytest.approx(0, abs=1e-12) and abs(st_.C[0, 0]) < 1e-12
    assert abs(np.linalg.det(st_.C)) < 1e-12 and st_.singular


def test_pair_stats_rejects_equal():
    with pytest.raises(ValueError):
        pair_stats(np.ones(2), np.ones(2), 8, 2)


@given(st.lists(cplx, min_size=3, max_size=3), st.lists(cplx, min_size=3, max_size=3))
def test_covariance_matches_cross_moment_formula(x, xh):
    x, xh = np.array(x), np.array(xh)
    if np.max(np.abs(x - xh)) < 1e-6:
        return
    N, L = 96, 3
    st_ = pair_stats(x, xh, N, L)
    d = x - xh
    mu, var = math.sqrt(math.pi) * N / (2 * L), (4 - math.pi) * N / (4 * L)
    mr, mi = mu * d.real.sum(), mu * d.imag.sum()
    cross = sum(d[l].real * d[l].imag * (mu**2 + var) for l in range(L))
    cross += sum(d[l].real * d[m].imag * mu**2 for l in range(L) for m in range(L) if m != l)
    assert st_.C[0, 1] == pytest.approx(cross - mr * mi, abs=1e-8 * (1 + abs(cross)))
    assert st_.C[0, 0] == pytest.approx(var * np.sum(d.real**2), abs=1e-9)
    np.testing.assert_allclose(st_.m, [mr, mi], atol=1e-9)


def _random_pairs(n, seed):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        L = int(rng.integers(1, 5))
        x = rng.normal(size=L) + 1j * rng.normal(size=L)
        xh = x + (rng.normal(size=L) + 1j * rng.normal(size=L)) * rng.choice([0.01, 0.3, 1.0])
        if rng.random() < 0.3:  # force a rank-one difference
            xh = x - rng.normal(size=L) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        out.append(pair_stats(x, xh, 32 * L, L, quantization_bits=[None, 4][int(rng.integers(2))]))
    return out


def test_mgf_normalization_1000_pairs():
    for s in _random_pairs(1000, 1):
        assert mgf_lambda(0.0, s) == 1.0
        if not s.singular:
            assert mgf_lambda(0.0, s, branch="singular") == 1.0


@given(st.integers(0, 10_000), st.lists(st.floats(0, 50), min_size=2, max_size=10))
def test_mgf_positive_nonincreasing(seed, ts):
    s = _random_pairs(1, seed)[0]
    t = -np.sort(np.array(ts)) / (1 + np.trace(s.C))
    v = mgf_lambda(t, s)
    assert np.all(v > 0) and np.all(np.isfinite(v))
    assert np.all(np.diff(v) <= 1e-15)


def test_mgf_chi_square_case():
    s = _stats([0, 0], np.eye(2) / 2)
    assert mgf_lambda(-1.0, s) == pytest.approx(0.5)
    t = np.linspace(-5, 0, 11)
    np.testing.assert_allclose(mgf_lambda(t, s), 1 / (1 - t))


def test_mgf_rejects_positive_t():
    with pytest.raises(ValueError):
        mgf_lambda(0.1, _stats([0, 0], np.eye(2)))


@given(st.integers(0, 10_000), st.floats(1e-3, 3.0))
def test_mgf_matches_printed_inverse_form(seed, scale):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(2, 2))
    C = A @ A.T + 0.1 * np.eye(2)
    m = rng.normal(size=2) * 3
    t = -scale / np.trace(C)
    s = _stats(m, C)
    assert mgf_lambda(t, s) == pytest.approx(inverse_form_literal(t, m, C), rel=1e-9)


def test_mgf_sampling_oracle():
    rng = make_rng(31)
    for s in _random_pairs(8, 5):
        w, V = np.linalg.eigh(s.C)
        z = rng.normal(size=(1_000_000, 2)) * np.sqrt(np.maximum(w, 0)) @ V.T + s.m
        lam = (z**2).sum(axis=1)
        for t in (-1e-6, -0.05 / (np.trace(s.C) + s.m @ s.m / 10 + 1e-12)):
            emp = np.mean(np.exp(t * lam))
            assert mgf_lambda(t, s) == pytest.approx(emp, rel=0.005)


def test_singular_fallback_warns():
    s_sing = pair_stats(np.ones(2), -np.ones(2), 16, 2)
    assert s_sing.singular
    with pytest.warns(RuntimeWarning):
        v = mgf_lambda(-0.01, s_sing, branch="nonsingular")
    assert v == pytest.approx(mgf_lambda(-0.01, s_sing))


@pytest.mark.parametrize("factor", [1.0, 3.0, 10.0])
@pytest.mark.parametrize("seed", range(5))
def test_branch_consistency_near_singular(factor, seed):
    rng = np.random.default_rng(seed)
    u = np.array([math.cos(rng.uniform(0, math.pi)), 0.0])
    u[1] = math.sqrt(1 - u[0] ** 2) * rng.choice([-1, 1])
    a = rng.uniform(1, 100)
    # second eigenvalue chosen so that det C = factor * 1e-9 * (tr C)^2 (approximately)
    b = factor * 1e-9 * a
    C = a * np.outer(u, u) + b * np.outer([-u[1], u[0]], [-u[1], u[0]])
    m = u * rng.uniform(0, 30)
    s = _stats(m, C)
    t = -1 / (4 * np.trace(C))
    ns = mgf_lambda(t, s, branch="nonsingular")
    sg = mgf_lambda(t, s, branch="singular")
    assert ns == pytest.approx(sg, rel=0.01)


def test_apep_limits_and_q_approx():
    x, xh = np.exp(1j * np.array([0.3, 0.3])), np.exp(1j * np.array([-0.3, 0.3]))
    assert apep(x, xh, SystemConfig(), 0.0) == pytest.approx(1 / 3)
    assert float(q_approx(3.0)) == pytest.approx(1.54e-3, rel=0.01)
    assert float(q_function(3.0)) == pytest.approx(1.35e-3, rel=0.01)
    assert float(q_approx(3.0)) == pytest.approx(math.exp(-4.5) / 12 + math.exp(-6) / 4)
    v = apep(x, xh, SystemConfig(), db_to_linear(np.array([-10.0, 0, 10, 30])))
    assert np.all((v > 0) & (v <= 1 / 3)) and np.all(np.diff(v) < 0)


def test_apep_vs_cpep_average():
    cfg = SystemConfig()
    cb = codebook_for(cfg)
    snr = db_to_linear(20.0)
    rng = make_rng(41)
    h = np.concatenate([sum_over_subsurfaces(np.abs(sample_rayleigh_channel((100_000, cfg.N), rng)), cfg.L)
                        for _ in range(10)])
    for i, j in [(1, 3), (0, 1), (0, 4), (2, 13)]:
        approx = float(apep(cb.X[i], cb.X[j], cfg, snr))
        exact = float(np.mean(cpep(cb.X[i], cb.X[j], h, cfg, snr)))
        if exact > 1e-12:
            assert exact / 3 <= approx <= 3 * exact


def _bound_reference(cfg, snr):
    cb = codebook_for(cfg)
    tot = 0.0
    for i in range(cb.size):
        for j in range(cb.size):
            if i == j:
                continue
            es, ev = cb.bit_errors(np.array([i]), np.array([j]))
            tot += float(apep(cb.X[i], cb.X[j], cfg, snr)) * int(es[0] + ev[0])
    return tot / (cb.size * cb.bits_per_use)


@pytest.mark.parametrize("kw", [dict(), dict(M=2, K=2, delta_theta=math.pi / 8), dict(L=3, N=96, M=2),
                                dict(quantization_bits=4), dict(bit_mode="mapped", K=2)])
def test_union_bound_matches_pairwise_loop(kw):
    cfg = SystemConfig(**kw)
    for snr_db in (0.0, 17.0):
        got = union_bound_aber(cfg, db_to_linear(snr_db)).bound[0]
        assert got == pytest.approx(_bound_reference(cfg, db_to_linear(snr_db)), rel=1e-10)


def test_union_bound_limits_and_flags():
    cfg = SystemConfig()
    res = union_bound_aber(cfg, db_to_linear(np.array([-60.0, 0, 40, 100])))
    assert res.flag_gt_one[0] and not res.flag_gt_one[1:].any()
    assert np.all(np.diff(res.bound) < 0)
    assert union_bound_aber(cfg, 1e10).bound[0] < 1e-4
    assert res.collisions == []


def test_union_bound_csv():
    text = union_bound_aber(SystemConfig(), db_to_linear(np.arange(0, 41, 2.0))).to_csv(["hello"])
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    assert lines[0] == "snr_db,bound,flag_gt_one" and len(lines) == 22
    assert "# config_hash=" in text


def test_union_bound_collisions():
    cfg = SystemConfig(K=1, delta_theta=math.pi / 4)
    ex = union_bound_aber(cfg, 100.0)
    inc = union_bound_aber(cfg, 100.0, collisions="include")
    assert len(ex.collisions) == 4
    assert inc.bound[0] > ex.bound[0]
    assert inc.bound[0] - ex.bound[0] == pytest.approx(0.5 * 2 * ex_err(cfg, ex.collisions) / (36 * 4))


def ex_err(cfg, pairs):
    cb = codebook_for(cfg)
    return sum(int(es[0] + ev[0]) for es, ev in (cb.bit_errors(np.array([i]), np.array([j])) for i, j in pairs))


def test_enumeration_cap():
    with pytest.raises(EnumerationCapError):
        union_bound_aber(SystemConfig(L=4, K=3, M=16, constellation_kind="qam"), 1.0)


@pytest.mark.parametrize("kw", [dict(), dict(K=2, delta_theta=3 * math.pi / 16), dict(quantization_bits=4)])
def test_nt_scaling_exact(kw):
    cfg = SystemConfig(**kw)
    snr = db_to_linear(np.arange(0, 51, 5.0))
    base = union_bound_aber(cfg, 2 * snr).bound
    np.testing.assert_array_equal(union_bound_aber(cfg.replace(Nt=2 * cfg.Nt), snr).bound, base)


def test_n_scaling_default():
    cfg = SystemConfig()
    snr = db_to_linear(np.arange(0, 51, 5.0))
    base = union_bound_aber(cfg, 2 * snr).bound
    np.testing.assert_allclose(union_bound_aber(cfg.replace(N=2 * cfg.N), snr).bound, base, rtol=1e-10, atol=0)


def test_n_scaling_not_exact_for_mean_terms():
    # mu_h^2 grows like N^2, so nonzero-mean pairs gain more from 2N than from 2*snr
    cfg = SystemConfig(K=2, delta_theta=3 * math.pi / 16)
    snr = db_to_linear(np.arange(0, 51, 5.0))
    base = union_bound_aber(cfg, 2 * snr).bound
    doubled = union_bound_aber(cfg.replace(N=2 * cfg.N), snr).bound
    np.testing.assert_allclose(doubled, base, rtol=1e-5)
    assert np.all(doubled <= base)


def test_k_delta_ordering():
    snr = db_to_linear(25.0)
    b = [union_bound_aber(SystemConfig(K=K), snr).bound[0] for K in (1, 2, 3)]
    assert b[0] <= b[1] <= b[2]
    assert union_bound_aber(SystemConfig(delta_theta=3 * math.pi / 16), snr).bound[0] < \
        union_bound_aber(SystemConfig(delta_theta=math.pi / 8), snr).bound[0]


def test_dominant_pair_is_singular_swap():
    cfg = SystemConfig()
    (i, j), s, w = dominant_pair(cfg, db_to_linear(30.0))
    cb = codebook_for(cfg)
    assert s.singular and np.allclose(s.m, 0)
    assert cb.s_index[i] == cb.s_index[j]
    np.testing.assert_array_equal(cb.v_symbol[i], cb.v_symbol[j][::-1])
    assert w > 0


def test_diversity_estimator():
    snr = db_to_linear(np.arange(0, 51, 2.0))
    assert diversity_order_estimate(snr, 0.3 * snr**-0.5) == pytest.approx(0.5, abs=1e-6)
    assert diversity_order_estimate(snr, 2 * snr**-1.0) == pytest.approx(1.0, abs=1e-6)
    aber = 0.3 * snr**-0.5
    aber[-3:] = 0
    assert diversity_order_estimate(snr, aber, top_db=20) == pytest.approx(0.5, abs=1e-6)
    with pytest.raises(ValueError):
        diversity_order_estimate(snr, np.zeros_like(snr))


def test_default_diversity_half():
    snr = db_to_linear(np.arange(30, 51, 1.0))
    b = union_bound_aber(SystemConfig(), snr).bound
    assert diversity_order_estimate(snr, b) == pytest.approx(0.5, abs=0.1)


def test_single_subsurface_closed_form():
    assert mgf_single_subsurface(0.0, 1.3, 64) == 1.0
    t = np.array([-1e-5, -1e-4, -1e-3, -1e-2])
    for d in (1j, 2j, 0.7, 0.5 + 0.5j):
        res = single_subsurface_crosscheck(t, d, 128)
        assert res["max_rel_diff"] < 1e-10
    small = -1e-7
    ratio_fixed_t = math.log(mgf_single_subsurface(small, 1.0, 256)) / math.log(mgf_single_subsurface(small, 1.0, 128))
    assert ratio_fixed_t == pytest.approx(4.0, rel=5e-3)


def test_clt_fit_ks():
    """Distribution of lambda from channel draws vs. the fitted bivariate Gaussian form."""
    rng = make_rng(51)
    for N, L, seed in [(128, 2, 0), (64, 2, 1), (96, 3, 2)]:
        h = np.concatenate([sum_over_subsurfaces(np.abs(sample_rayleigh_channel((100_000, N), rng)), L)
                            for _ in range(10)])
        cb = codebook_for(SystemConfig(N=N, L=L, M=2 if L == 3 else 4))
        prng = np.random.default_rng(seed)
        pairs = [tuple(prng.choice(cb.size, 2, replace=False)) for _ in range(7)]
        for i, j in pairs:
            d = cb.X[i] - cb.X[j]
            lam = np.abs(h @ d) ** 2
            s = pair_stats(cb.X[i], cb.X[j], N, L)
            w, V = np.linalg.eigh(s.C)
            z = prng.normal(size=(1_000_000, 2)) * np.sqrt(np.maximum(w, 0)) @ V.T + s.m
            ks = sstats.ks_2samp(lam, (z**2).sum(axis=1)).statistic
            assert ks <= 0.01, (N, L, i, j, ks)
