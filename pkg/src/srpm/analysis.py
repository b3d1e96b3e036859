"""Closed-form ABER chain: pair statistics, MGF of the pairwise metric, APEP, union bound.

The pairwise statistic is ``delta = h^T (x - x_hat)`` with CLT-Gaussian
sub-surface gains.  Its squared magnitude ``lambda = |delta|^2`` is a
quadratic form in the bivariate Gaussian ``(Re delta, Im delta)`` with mean
``m`` and covariance ``C``; everything downstream is evaluated on the
negative real axis of its MGF.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .config import SystemConfig, linear_to_db
from .modem import COLLISION_TOL, Codebook, codebook_for

SINGULAR_RTOL = 1e-9
DEFAULT_HYPOTHESIS_CAP = 10_000


class EnumerationCapError(ValueError):
    """The codebook is too large for exhaustive pair enumeration."""


@dataclass(frozen=True)
class GainMoments:
    """CLT moments of one sub-surface gain ``h_l = a_l + j b_l``.

    ``b_l`` is nonzero only with quantized base phases, where each element
    keeps a residual phase error uniform on ``(-pi/2^b, pi/2^b)``.
    """

    mu: float
    var: float
    var_imag: float = 0.0


def gain_moments(N: int, L: int, quantization_bits: int | None = None) -> GainMoments:
    n = N / L
    mean_alpha = math.sqrt(math.pi) / 2
    if quantization_bits is None:
        return GainMoments(mean_alpha * n, (1 - math.pi / 4) * n)
    w = math.pi / 2**quantization_bits
    e_cos = math.sin(w) / w
    e_cos2 = 0.5 * (1 + math.sin(2 * w) / (2 * w))
    return GainMoments(
        mu=mean_alpha * e_cos * n,
        var=(e_cos2 - (mean_alpha * e_cos) ** 2) * n,
        var_imag=(1 - e_cos2) * n,
    )


def moments_for(cfg: SystemConfig) -> GainMoments:
    return gain_moments(cfg.N, cfg.L, cfg.quantization_bits)


@dataclass(frozen=True)
class PairStats:
    m: np.ndarray
    C: np.ndarray
    singular: bool
    c: float | None = None
    mu_x: float | None = None
    sigma_x2: float | None = None
    mu_h: float = 0.0
    sigma_h2: float = 0.0


def _delta_moments(D: np.ndarray, g: GainMoments):
    """Mean / covariance entries of (Re delta, Im delta) for difference rows ``D``."""
    dr, di = D.real, D.imag
    sr, si = dr.sum(axis=-1), di.sum(axis=-1)
    qrr = (dr * dr).sum(axis=-1)
    qii = (di * di).sum(axis=-1)
    qri = (dr * di).sum(axis=-1)
    mu_r = g.mu * sr
    mu_i = g.mu * si
    s_rr = g.var * qrr + g.var_imag * qii
    s_ii = g.var * qii + g.var_imag * qrr
    s_ri = (g.var - g.var_imag) * qri
    return mu_r, mu_i, s_rr, s_ii, s_ri


def _is_singular(s_rr, s_ii, s_ri):
    det = s_rr * s_ii - s_ri * s_ri
    return np.abs(det) <= SINGULAR_RTOL * (s_rr + s_ii) ** 2


def pair_stats(x, x_hat, N: int, L: int, quantization_bits: int | None = None) -> PairStats:
    """Statistics of ``delta`` for transmitted ``x`` detected as ``x_hat``.

    In the singular case ``lambda = c * X^2`` with ``X`` a real Gaussian; we
    take ``x - x_hat = u * r`` with ``u`` the largest entry of the difference
    and ``r`` real, giving ``c = |u|^2``, ``X = sum r_l h_l``.
    """
    d = np.asarray(x, dtype=complex) - np.asarray(x_hat, dtype=complex)
    if d.shape[-1] != L:
        raise ValueError(f"expected length-{L} vectors")
    if np.max(np.abs(d)) <= COLLISION_TOL:
        raise ValueError("x == x_hat: the pairwise statistic is identically zero")
    g = gain_moments(N, L, quantization_bits)
    mu_r, mu_i, s_rr, s_ii, s_ri = (float(v) for v in _delta_moments(d, g))
    C = np.array([[s_rr, s_ri], [s_ri, s_ii]])
    m = np.array([mu_r, mu_i])
    singular = bool(_is_singular(s_rr, s_ii, s_ri))
    c = mu_x = sigma_x2 = None
    if singular:
        u = d[np.argmax(np.abs(d))]
        r = (d * np.conj(u)).real / abs(u) ** 2
        c = abs(u) ** 2
        mu_x = g.mu * r.sum()
        sigma_x2 = g.var * (r * r).sum()
    return PairStats(m=m, C=C, singular=singular, c=c, mu_x=mu_x, sigma_x2=sigma_x2, mu_h=g.mu, sigma_h2=g.var)


def _log_mgf_nonsingular(t, mu_r, mu_i, s_rr, s_ii, s_ri):
    # -1/2 m^T [I - (I - 2tC)^{-1}] C^{-1} m  ==  t m^T (I - 2tC)^{-1} m, no C^{-1} needed
    a = 1 - 2 * t * s_rr
    d = 1 - 2 * t * s_ii
    b = -2 * t * s_ri
    det = a * d - b * b
    quad = d * mu_r * mu_r - 2 * b * mu_r * mu_i + a * mu_i * mu_i
    return -0.5 * np.log(det) + t * quad / det


def _log_mgf_singular(t, c_sigma2, c_mu2):
    # c_sigma2 = c sigma_x^2, c_mu2 = c mu_x^2
    den = 1 - 2 * t * c_sigma2
    return -0.5 * np.log(den) + t * c_mu2 / den


def log_mgf_lambda(t, stats: PairStats, branch: str | None = None):
    """Log of the MGF of ``lambda`` at ``t <= 0`` (scalar or array ``t``)."""
    t = np.asarray(t, dtype=float)
    if np.any(t > 0):
        raise ValueError("the MGF is only evaluated for t <= 0")
    if branch is None:
        branch = "singular" if stats.singular else "nonsingular"
    if branch == "nonsingular" and stats.singular:
        warnings.warn("covariance is numerically singular; using the rank-one form", RuntimeWarning, stacklevel=2)
        branch = "singular"
    if branch == "singular":
        if stats.c is None:
            c_sigma2 = float(np.trace(stats.C))
            c_mu2 = float(stats.m @ stats.m)
        else:
            c_sigma2 = stats.c * stats.sigma_x2
            c_mu2 = stats.c * stats.mu_x**2
        return _log_mgf_singular(t, c_sigma2, c_mu2)
    (s_rr, s_ri), (_, s_ii) = stats.C
    return _log_mgf_nonsingular(t, stats.m[0], stats.m[1], s_rr, s_ii, s_ri)


def mgf_lambda(t, stats: PairStats, branch: str | None = None):
    return np.exp(log_mgf_lambda(t, stats, branch))


def link_gain(cfg: SystemConfig, snr) -> np.ndarray:
    """``P Nt beta^2 / sigma^2`` for linear ``snr = P / sigma^2``."""
    return np.asarray(snr, dtype=float) * cfg.Nt * cfg.beta**2


def q_function(x):
    return ndtr(-np.asarray(x, dtype=float))


def q_approx(x):
    """Two-exponential approximation ``Q(x) ~ e^{-x^2/2}/12 + e^{-2x^2/3}/4``."""
    x = np.asarray(x, dtype=float)
    return np.exp(-x * x / 2) / 12 + np.exp(-2 * x * x / 3) / 4


def apep_from_stats(stats: PairStats, gain) -> np.ndarray:
    gain = np.asarray(gain, dtype=float)
    return mgf_lambda(-gain / 4, stats) / 12 + mgf_lambda(-gain / 3, stats) / 4


def apep(x, x_hat, cfg: SystemConfig, snr) -> np.ndarray:
    """Approximate average PEP of detecting ``x`` as ``x_hat`` at linear ``snr``."""
    stats = pair_stats(x, x_hat, cfg.N, cfg.L, cfg.quantization_bits)
    return apep_from_stats(stats, link_gain(cfg, snr))


def cpep(x, x_hat, h, cfg: SystemConfig, snr) -> np.ndarray:
    """Exact PEP conditioned on gains ``h`` (last axis L)."""
    lam = np.abs(np.asarray(h) @ (np.asarray(x) - np.asarray(x_hat))) ** 2
    return q_function(np.sqrt(link_gain(cfg, snr) * lam / 2))


@dataclass
class AberBound:
    snr_grid: np.ndarray
    bound: np.ndarray
    collisions: list = field(default_factory=list)
    per_pair_apep: dict | None = None
    config_hash: str | None = None

    @property
    def snr_db(self) -> np.ndarray:
        return linear_to_db(self.snr_grid)

    @property
    def flag_gt_one(self) -> np.ndarray:
        return self.bound > 1

    def to_csv(self, header: list[str] | None = None) -> str:
        lines = [f"# {h}" for h in (header or [])]
        if self.config_hash:
            lines.append(f"# config_hash={self.config_hash}")
        lines.append("snr_db,bound,flag_gt_one")
        for db, b, f in zip(self.snr_db, self.bound, self.flag_gt_one):
            lines.append(f"{db:.6g},{b:.12e},{int(f)}")
        return "\n".join(lines) + "\n"


def _pair_blocks(H: int, max_pairs: int):
    """Yield (rows, cols) index blocks covering every pair i < j in fixed order."""
    rows = max(1, max_pairs // max(H, 1))
    cols = np.arange(H)
    for start in range(0, H - 1, rows):
        ii = np.arange(start, min(start + rows, H - 1))
        yield ii, cols[start + 1 :]


def _block_statistics(codebook: Codebook, ii: np.ndarray, jj: np.ndarray, g: GainMoments):
    """Moments, bit errors and collision mask for the (ii x jj) block, upper triangle only."""
    Xi, Xj = codebook.X[ii], codebook.X[jj]
    mask = jj[None, :] > ii[:, None]
    sr = np.zeros(mask.shape)
    si = np.zeros(mask.shape)
    qrr = np.zeros(mask.shape)
    qii = np.zeros(mask.shape)
    qri = np.zeros(mask.shape)
    dmax = np.zeros(mask.shape)
    for l in range(codebook.L):
        d = Xi[:, l, None] - Xj[None, :, l]
        dr, di = d.real, d.imag
        sr += dr
        si += di
        qrr += dr * dr
        qii += di * di
        qri += dr * di
        np.maximum(dmax, np.abs(d), out=dmax)
    es, ev = codebook.bit_errors(ii[:, None], jj[None, :]) if codebook.L else (0, 0)
    err = (es + ev).astype(float)
    same = mask & (dmax <= COLLISION_TOL)
    valid = mask & ~same
    mu_r, mu_i = g.mu * sr[valid], g.mu * si[valid]
    a, b, c = qrr[valid], qii[valid], qri[valid]
    s_rr = g.var * a + g.var_imag * b
    s_ii = g.var * b + g.var_imag * a
    s_ri = (g.var - g.var_imag) * c
    return (mu_r, mu_i, s_rr, s_ii, s_ri), err[valid], err[same], valid, same


def union_bound_aber(
    cfg: SystemConfig,
    snr,
    codebook: Codebook | None = None,
    collisions: str = "exclude",
    cap: int = DEFAULT_HYPOTHESIS_CAP,
    keep_pairs: bool = False,
    max_pairs: int = 400_000,
) -> AberBound:
    """Union bound on the ABER over all ordered hypothesis pairs.

    ``snr`` is linear (scalar or array).  Pairs with identical signals are
    excluded and reported (``collisions="exclude"``) or charged a pairwise
    error probability of 1/2 (``collisions="include"``), which is what a
    deterministic tie-break costs on average over the two directions.
    Inputs of the two directions of a pair give the same APEP, so only
    ``i < j`` is evaluated and doubled.
    """
    if collisions not in ("exclude", "include"):
        raise ValueError("collisions must be 'exclude' or 'include'")
    codebook = codebook if codebook is not None else codebook_for(cfg)
    H = codebook.size
    if H > cap:
        raise EnumerationCapError(
            f"{H} hypotheses exceeds the cap of {cap}; reduce M, K or L (or raise the cap)"
        )
    snr_arr = np.atleast_1d(np.asarray(snr, dtype=float))
    gain = link_gain(cfg, snr_arr)
    g = moments_for(cfg)
    total = np.zeros_like(snr_arr)
    found: list[tuple[int, int]] = []
    per_pair = {} if keep_pairs else None
    for ii, jj in _pair_blocks(H, max_pairs):
        (mu_r, mu_i, s_rr, s_ii, s_ri), err, err_same, valid, same = _block_statistics(codebook, ii, jj, g)
        if same.any():
            r, c = np.nonzero(same)
            found.extend(zip(ii[r].tolist(), jj[c].tolist()))
        sing = _is_singular(s_rr, s_ii, s_ri)
        tr = s_rr + s_ii
        mm = mu_r * mu_r + mu_i * mu_i
        p = np.empty((mu_r.size, snr_arr.size))
        for col, gk in enumerate(gain):
            acc = np.zeros(mu_r.size)
            for t, w in ((-gk / 4, 1 / 12), (-gk / 3, 1 / 4)):
                lm = np.where(sing, _log_mgf_singular(t, tr, mm), _log_mgf_nonsingular(t, mu_r, mu_i, s_rr, s_ii, s_ri))
                acc += w * np.exp(lm)
            p[:, col] = acc
        total += err @ p
        if collisions == "include":
            total += 0.5 * err_same.sum()
        if per_pair is not None:
            r, c = np.nonzero(valid)
            for k, (i, j) in enumerate(zip(ii[r].tolist(), jj[c].tolist())):
                per_pair[(i, j)] = p[k]
    bound = 2 * total / (H * codebook.bits_per_use)
    return AberBound(snr_grid=snr_arr, bound=bound, collisions=sorted(found), per_pair_apep=per_pair, config_hash=cfg.config_hash())


def dominant_pair(cfg: SystemConfig, snr: float, codebook: Codebook | None = None):
    """The unordered pair with the largest ``APEP * e`` contribution and its stats."""
    codebook = codebook if codebook is not None else codebook_for(cfg)
    res = union_bound_aber(cfg, snr, codebook, keep_pairs=True)
    best, val = None, -1.0
    for (i, j), p in res.per_pair_apep.items():
        es, ev = codebook.bit_errors(np.array([i]), np.array([j]))
        w = float(p[0]) * int(es[0] + ev[0])
        if w > val:
            best, val = (i, j), w
    i, j = best
    stats = pair_stats(codebook.X[i], codebook.X[j], cfg.N, cfg.L, cfg.quantization_bits)
    return best, stats, val


def mgf_single_subsurface(t, distance_sq: float, N: int):
    """Closed-form MGF for one sub-surface, with ``distance_sq = |x - x_hat|^2``."""
    t = np.asarray(t, dtype=float)
    a = (4 - math.pi) * distance_sq * N * t
    return (1 - a / 2) ** -0.5 * np.exp(distance_sq * math.pi * N**2 * t / (4 - 2 * a))


def single_subsurface_crosscheck(t, d: complex, N: int) -> dict:
    """Compare the one-sub-surface closed form with the general MGF for difference ``d``."""
    stats = pair_stats(np.array([d]), np.array([0.0]), N, 1)
    closed = mgf_single_subsurface(t, abs(d) ** 2, N)
    general = mgf_lambda(t, stats)
    rel = np.abs(closed - general) / np.maximum(np.abs(general), np.finfo(float).tiny)
    return {"closed_form": closed, "general": general, "max_rel_diff": float(np.max(rel))}


def diversity_order_estimate(snr, aber, top_db: float | None = None, min_points: int = 3) -> float:
    """Least-squares slope of ``-log2(aber)`` against ``log2(snr)``.

    ``top_db`` restricts the fit to points within that many dB of the highest
    SNR.  Zero-valued points at the high end shrink the window.
    """
    snr = np.asarray(snr, dtype=float)
    aber = np.asarray(aber, dtype=float)
    order = np.argsort(snr)
    snr, aber = snr[order], aber[order]
    if not np.any(aber > 0):
        raise ValueError("all ABER values are zero: insufficient resolution")
    while aber.size and aber[-1] <= 0:
        snr, aber = snr[:-1], aber[:-1]
    if top_db is not None:
        keep = linear_to_db(snr) >= linear_to_db(snr[-1]) - top_db - 1e-9
        snr, aber = snr[keep], aber[keep]
    keep = aber > 0
    snr, aber = snr[keep], aber[keep]
    if snr.size < min_points:
        raise ValueError(f"need at least {min_points} nonzero points in the window")
    slope = np.polyfit(np.log2(snr), -np.log2(aber), 1)[0]
    return float(slope)
