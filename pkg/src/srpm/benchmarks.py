"""Benchmark RIS information-transfer codebooks (PBIT, RIS-RPM, RIS-QRM)."""

from __future__ import annotations

import itertools

import numpy as np

from .modem import Codebook, Constellation, gray


def pbit_codebook(constellation: Constellation, L: int) -> Codebook:
    """Each sub-surface is ON or OFF, one bit each; hypotheses ordered (s, pattern)."""
    combos = np.array(list(itertools.product(range(constellation.M), *([(0, 1)] * L))), dtype=np.int64)
    s_idx, pattern = combos[:, 0], combos[:, 1:]
    X = constellation.points[s_idx][:, None] * pattern
    return Codebook(
        scheme="pbit",
        X=X.astype(complex),
        s_index=s_idx,
        v_symbol=pattern,
        s_label=constellation.labels[s_idx],
        v_label=pattern.copy(),
        s_bits=constellation.bits,
        group_bits=1,
        counting="hamming",
        constellation=constellation,
    )


def rpm_codebook(constellation: Constellation, L: int) -> Codebook:
    """Exactly one sub-surface OFF; its index carries log2(L) bits."""
    if L < 2 or L & (L - 1):
        raise ValueError(f"RPM needs L a power of two >= 2, got {L}")
    bits = L.bit_length() - 1
    combos = np.array(list(itertools.product(range(constellation.M), range(L))), dtype=np.int64)
    s_idx, off = combos[:, 0], combos[:, 1]
    on = np.ones((len(combos), L))
    on[np.arange(len(combos)), off] = 0.0
    X = constellation.points[s_idx][:, None] * on
    return Codebook(
        scheme="rpm",
        X=X.astype(complex),
        s_index=s_idx,
        v_symbol=off[:, None],
        s_label=constellation.labels[s_idx],
        v_label=gray(off)[:, None],
        s_bits=constellation.bits,
        group_bits=bits,
        counting="hamming",
        constellation=constellation,
    )


def qrm_reference_signals(constellation: Constellation, L: int) -> np.ndarray:
    """RIS-QRM signal set built directly from in-phase / quadrature reflections.

    Each sub-surface reflects either in phase (multiply by 1) or in
    quadrature (multiply by j).
    """
    rows = []
    for s in constellation.points:
        for pattern in itertools.product((1.0 + 0j, 1j), repeat=L):
            rows.append(s * np.array(pattern))
    return np.array(rows)
