"""Base RIS phases, discrete quantization, MRT precoding and the scalar link model."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, build_bs_ris_channel, steering_vector, sum_over_subsurfaces
from .config import SystemConfig


class DegenerateChannelError(ValueError):
    """The effective BS-user channel is identically zero."""


@dataclass(frozen=True)
class BasePhaseProfile:
    theta_star: np.ndarray
    quantized: bool = False
    b: int | None = None
    degenerate: bool = False


@dataclass(frozen=True)
class Precoder:
    w: np.ndarray


def optimal_base_phases(hr: np.ndarray, phi_r: float, cfg: SystemConfig) -> BasePhaseProfile:
    """Co-phasing phases ``theta_n = -angle(conj(hr_n) a_n(phi_r))``.

    Elements with an exactly-zero channel get phase 0 and set ``degenerate``.
    """
    hr = np.asarray(hr, dtype=complex)
    a = steering_vector(hr.size, phi_r, cfg.antenna_spacing_ratio)
    cascade = hr.conj() * a
    zero = cascade == 0
    theta = np.where(zero, 0.0, -np.angle(cascade))
    if zero.any():
        warnings.warn(f"{int(zero.sum())} RIS element(s) see a zero channel", RuntimeWarning, stacklevel=2)
    return BasePhaseProfile(theta_star=theta, degenerate=bool(zero.any()))


def quantization_grid(b: int) -> np.ndarray:
    return 2 * np.pi * np.arange(2**b) / 2**b


def quantize_angles(theta: np.ndarray, b: int) -> np.ndarray:
    """Nearest point of {2 pi k / 2^b}; exact midpoints go to the smaller index."""
    if b < 1:
        raise ValueError("b must be >= 1")
    n = 2**b
    step = 2 * np.pi / n
    pos = np.mod(np.asarray(theta, dtype=float), 2 * np.pi) / step
    lower = np.floor(pos)
    frac = pos - lower
    k = np.where(frac > 0.5, lower + 1, lower).astype(int) % n
    return k * step


def quantize_phases(profile: BasePhaseProfile, b: int) -> BasePhaseProfile:
    return BasePhaseProfile(
        theta_star=quantize_angles(profile.theta_star, b),
        quantized=True,
        b=b,
        degenerate=profile.degenerate,
    )


def base_profile(real: ChannelRealization, cfg: SystemConfig) -> BasePhaseProfile:
    profile = optimal_base_phases(real.hr, cfg.phi_r, cfg)
    if cfg.quantization_bits is not None:
        profile = quantize_phases(profile, cfg.quantization_bits)
    return profile


def mrt_precoder(hr: np.ndarray, profile: BasePhaseProfile, G: np.ndarray) -> Precoder:
    """``w = (hr^H Theta G)^H / ||hr^H Theta G||``."""
    eff = (np.asarray(hr).conj() * np.exp(1j * profile.theta_star)) @ G
    norm = np.linalg.norm(eff)
    if norm == 0:
        raise DegenerateChannelError("effective channel hr^H Theta G is all-zero")
    return Precoder(w=eff.conj() / norm)


def received_full(
    cfg: SystemConfig,
    hr: np.ndarray,
    profile: BasePhaseProfile,
    offsets: np.ndarray,
    s: complex,
    noise: complex = 0.0,
    precoder: Precoder | None = None,
    phase_noise: np.ndarray | None = None,
) -> complex:
    """Matrix-form received sample ``sqrt(P) hr^H diag(e^{j theta~}) G w s + z``.

    ``offsets`` is the length-N per-element phase offset (k_n * delta_theta).
    The precoder is designed for the base phases only, as the BS does not
    know the RIS message.
    """
    G = build_bs_ris_channel(cfg)
    if precoder is None:
        precoder = mrt_precoder(hr, profile, G)
    phases = profile.theta_star + np.asarray(offsets, dtype=float)
    if phase_noise is not None:
        phases = phases + phase_noise
    return np.sqrt(cfg.P) * (np.asarray(hr).conj() * np.exp(1j * phases)) @ G @ precoder.w * s + noise


def effective_gains(real: ChannelRealization) -> np.ndarray:
    """Per-sub-surface real gains ``h_l = sum_{n in A_l} alpha_n``."""
    return np.array([real.alphas[idx].sum() for idx in real.assignment])


def compensated_elements(cfg: SystemConfig, hr: np.ndarray, phase_noise: np.ndarray | None = None) -> np.ndarray:
    """Per-element cascade ``conj(hr_n) a_n e^{j theta_n}`` after base phasing.

    Works on a batch of channels (last axis N).  Continuous phases give
    ``alpha_n``; quantized phases leave the residual ``alpha_n e^{j q_n}``.
    For an unquantized, noiseless setup this is just ``|hr|``.
    """
    hr = np.asarray(hr)
    if cfg.quantization_bits is None and phase_noise is None:
        return np.abs(hr)
    a = steering_vector(cfg.N, cfg.phi_r, cfg.antenna_spacing_ratio)
    cascade = hr.conj() * a
    theta = -np.angle(cascade)
    if cfg.quantization_bits is not None:
        theta = quantize_angles(theta, cfg.quantization_bits)
    elem = cascade * np.exp(1j * theta)
    if phase_noise is not None:
        elem = elem * np.exp(1j * phase_noise)
    return elem


def scalar_gains(cfg: SystemConfig, hr: np.ndarray, phase_noise: np.ndarray | None = None):
    """Known receiver gains ``h`` and true gains ``g`` of the reduced model.

    The link reduces to ``y = sqrt(P Nt) beta g^T x + z`` where the detector
    uses ``h``.  Both are real sums of ``alpha_n`` for continuous phases; with
    quantization they are complex and carry the common phase rotation of the
    MRT precoder; with phase noise ``g`` differs from ``h``.
    """
    base = compensated_elements(cfg, hr)
    if np.isrealobj(base):
        h = sum_over_subsurfaces(base, cfg.L)
        rot = None
    else:
        total = base.sum(axis=-1, keepdims=True)
        rot = np.exp(-1j * np.angle(total))
        h = sum_over_subsurfaces(base, cfg.L) * rot
    if phase_noise is None:
        return h, h
    noisy = compensated_elements(cfg, hr, phase_noise)
    g = sum_over_subsurfaces(noisy, cfg.L)
    if rot is not None:
        g = g * rot
    return h, g


def link_amplitude(cfg: SystemConfig) -> float:
    """``sqrt(P Nt) beta``."""
    return float(np.sqrt(cfg.P * cfg.Nt) * cfg.beta)
