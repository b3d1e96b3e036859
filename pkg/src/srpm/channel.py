"""Random sources and channel generation for the BS-RIS and RIS-user links."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the stream identified by ``(seed, *key)``.

    Streams with different keys are statistically independent, so work can
    be split over any number of workers without changing the draws.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key)))


def steering_vector(n: int, phi: float, spacing: float = 0.5) -> np.ndarray:
    """Uniform linear array response ``exp(j 2 pi spacing m sin(phi))``, m = 0..n-1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    m = np.arange(n)
    return np.exp(1j * 2 * np.pi * spacing * m * np.sin(phi))


def build_bs_ris_channel(cfg: SystemConfig) -> np.ndarray:
    """Rank-one LoS channel ``beta a_N(phi_r) a_Nt(phi_t)^H`` of shape (N, Nt)."""
    a_rx = steering_vector(cfg.N, cfg.phi_r, cfg.antenna_spacing_ratio)
    a_tx = steering_vector(cfg.Nt, cfg.phi_t, cfg.antenna_spacing_ratio)
    return cfg.beta * np.outer(a_rx, a_tx.conj())


def sample_rayleigh_channel(n, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. CN(0, 1) entries; ``n`` may be an int or a shape tuple."""
    shape = (n,) if np.isscalar(n) else tuple(n)
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)


def sample_complex_noise(shape, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    return sample_rayleigh_channel(shape, rng) * np.sqrt(sigma2)


def sample_von_mises(kappa: float, rng: np.random.Generator, size=None) -> np.ndarray:
    """Von Mises(0, kappa) draws in (-pi, pi] by Best-Fisher rejection.

    The envelope is a wrapped Cauchy; ``kappa == 0`` is the uniform circle.
    """
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    shape = () if size is None else ((size,) if np.isscalar(size) else tuple(size))
    count = int(np.prod(shape, dtype=int))
    if kappa == 0:
        out = np.pi - rng.uniform(0.0, 2 * np.pi, count)
        return out.reshape(shape) if shape else out[0]

    if kappa < 1e-5:
        s = 1.0 / kappa + kappa
    else:
        tau = 1.0 + np.sqrt(1.0 + 4.0 * kappa * kappa)
        rho = (tau - np.sqrt(2.0 * tau)) / (2.0 * kappa)
        s = (1.0 + rho * rho) / (2.0 * rho)

    out = np.empty(count)
    todo = np.arange(count)
    while todo.size:
        n = todo.size
        u1 = rng.random(n)
        u2 = rng.random(n)
        u3 = rng.random(n)
        z = np.cos(np.pi * u1)
        w = (1.0 + s * z) / (s + z)
        y = kappa * (s - w)
        with np.errstate(divide="ignore", invalid="ignore"):
            ok = (y * (2.0 - y) - u2 > 0) | (np.log(y / u2) + 1.0 - y >= 0)
        theta = np.arccos(np.clip(w[ok], -1.0, 1.0))
        theta = np.where(u3[ok] > 0.5, theta, -theta)
        out[todo[ok]] = theta
        todo = todo[~ok]
    out[out == -np.pi] = np.pi
    return out.reshape(shape) if shape else out[0]


def subsurface_index(N: int, L: int) -> np.ndarray:
    """Sub-surface of each element: contiguous blocks of N/L elements."""
    return np.repeat(np.arange(L), N // L)


def sum_over_subsurfaces(values: np.ndarray, L: int) -> np.ndarray:
    """Sum the last axis (length N) within each sub-surface block."""
    n = values.shape[-1]
    return values.reshape(values.shape[:-1] + (L, n // L)).sum(axis=-1)


@dataclass(frozen=True)
class ChannelRealization:
    """One RIS-user channel draw with its per-sub-surface real gains."""

    hr: np.ndarray
    alphas: np.ndarray
    h: np.ndarray
    assignment: tuple[np.ndarray, ...]

    @classmethod
    def from_hr(cls, hr: np.ndarray, L: int) -> "ChannelRealization":
        hr = np.asarray(hr, dtype=complex)
        if hr.size % L:
            raise ValueError("channel length must be a multiple of L")
        alphas = np.abs(hr)
        blocks = tuple(np.arange(hr.size).reshape(L, -1))
        return cls(hr=hr, alphas=alphas, h=sum_over_subsurfaces(alphas, L), assignment=blocks)


def draw_realization(cfg: SystemConfig, rng: np.random.Generator) -> ChannelRealization:
    return ChannelRealization.from_hr(sample_rayleigh_channel(cfg.N, rng), cfg.L)


def subsurface_gain_moments(N: int, L: int) -> tuple[float, float]:
    """CLT mean and variance of a sub-surface gain (sum of N/L Rayleigh magnitudes)."""
    return np.sqrt(np.pi) * N / (2 * L), (4 - np.pi) * N / (4 * L)
