"""Constellations, RIS offset alphabets, codebooks, ML detection and ambiguity checks.

Every scheme is represented by a :class:`Codebook`: hypothesis ``i`` puts the
complex coefficient ``X[i, l]`` on sub-surface gain ``h_l``, so the noiseless
received sample is ``a * h @ X[i]``.  SRPM uses ``X[i, l] = s * exp(j k_l dtheta)``;
the on/off benchmarks use the same structure with 0/1 coefficients.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .config import SystemConfig

COLLISION_TOL = 1e-12


class AmbiguousCodebookError(ValueError):
    """Two hypotheses produce the same noiseless signal."""

    def __init__(self, collisions, codebook: "Codebook | None" = None):
        self.collisions = list(collisions)
        lines = [f"codebook is not uniquely decodable: {len(self.collisions)} colliding pair(s)"]
        if codebook is not None:
            for i, j in self.collisions[:10]:
                lines.append(f"  {codebook.describe(i)}  ==  {codebook.describe(j)}")
            if len(self.collisions) > 10:
                lines.append(f"  ... {len(self.collisions) - 10} more")
        super().__init__("\n".join(lines))


def gray(n):
    n = np.asarray(n)
    return n ^ (n >> 1)


def _log2_int(M: int) -> int:
    if M < 1 or M & (M - 1):
        raise ValueError(f"{M} is not a power of two")
    return M.bit_length() - 1


@dataclass(frozen=True)
class Constellation:
    kind: str
    M: int
    points: np.ndarray
    labels: np.ndarray

    @property
    def bits(self) -> int:
        return _log2_int(self.M)

    def label_string(self, i: int) -> str:
        return format(int(self.labels[i]), f"0{self.bits}b") if self.bits else ""


def build_constellation(kind: str, M: int) -> Constellation:
    """Unit-energy Gray-labeled PSK or (square / rectangular) QAM.

    PSK points sit at odd multiples of pi/M for M >= 4 (QPSK at e^{j pi/4},
    ...), BPSK is {1, -1}.  QAM uses per-axis Gray coded PAM levels.
    """
    m = _log2_int(M)
    kind = kind.lower()
    if kind == "psk":
        idx = np.arange(M)
        offset = np.pi / M if M >= 4 else 0.0
        points = np.exp(1j * (2 * np.pi * idx / M + offset))
        labels = gray(idx)
    elif kind == "qam":
        if M < 4:
            raise ValueError("QAM needs M >= 4")
        mi, mq = (m + 1) // 2, m // 2
        ni, nq = 2**mi, 2**mq
        ii, qq = np.meshgrid(np.arange(ni), np.arange(nq), indexing="ij")
        ii, qq = ii.ravel(), qq.ravel()
        points = (2 * ii - ni + 1) + 1j * (2 * qq - nq + 1)
        points = points / np.sqrt(np.mean(np.abs(points) ** 2))
        labels = (gray(ii) << mq) | gray(qq)
    else:
        raise ValueError(f"unsupported constellation kind {kind!r}")
    return Constellation(kind=kind, M=M, points=points.astype(complex), labels=np.asarray(labels, dtype=np.int64))


@dataclass(frozen=True)
class OffsetAlphabet:
    """RIS phase-offset symbols ``k * delta_theta`` for ``k`` in ``indices``.

    ``transmit_subset`` lists the indices actually sent (in index order) and
    ``labels`` their bit labels.  In full-alphabet mode every index is sent
    and there are no labels.
    """

    indices: tuple[int, ...]
    delta_theta: float
    transmit_subset: tuple[int, ...]
    labels: tuple[int, ...] | None
    bits: int

    @property
    def mode(self) -> str:
        return "full" if self.labels is None else "mapped"

    def phase(self, k) -> np.ndarray:
        return np.exp(1j * np.asarray(k) * self.delta_theta)

    def label_string(self, k: int) -> str:
        if self.labels is None:
            return ""
        return format(self.labels[self.transmit_subset.index(k)], f"0{self.bits}b")


def build_offset_alphabet(indices, delta_theta: float, bit_mode: str = "full") -> OffsetAlphabet:
    """Offset alphabet in full-alphabet or bit-mapped mode.

    Bit-mapped mode keeps the ``2**floor(log2 |indices|)`` indices of smallest
    ``|k|`` (ties to negative ``k``) and Gray-labels them in index order.
    """
    indices = tuple(sorted(int(k) for k in indices))
    bits = int(math.floor(math.log2(len(indices))))
    if bit_mode == "full":
        return OffsetAlphabet(indices, float(delta_theta), indices, None, bits)
    if bit_mode != "mapped":
        raise ValueError(f"unknown bit mode {bit_mode!r}")
    keep = sorted(indices, key=lambda k: (abs(k), k))[: 2**bits]
    subset = tuple(sorted(keep))
    labels = tuple(int(g) for g in gray(np.arange(len(subset))))
    return OffsetAlphabet(indices, float(delta_theta), subset, labels, bits)


def alphabet_for(cfg: SystemConfig) -> OffsetAlphabet:
    return build_offset_alphabet(cfg.indices, cfg.delta_theta, cfg.bit_mode)


def constellation_for(cfg: SystemConfig) -> Constellation:
    return build_constellation(cfg.constellation_kind, cfg.M)


@dataclass(frozen=True)
class Codebook:
    """Finite hypothesis set with bit accounting.

    ``counting == "hamming"``: errors are label Hamming distances.
    ``counting == "symbol"``: a wrong ``s`` costs ``s_bits`` and each wrong
    group symbol costs ``group_bits``.
    """

    scheme: str
    X: np.ndarray
    s_index: np.ndarray
    v_symbol: np.ndarray
    s_label: np.ndarray
    v_label: np.ndarray
    s_bits: int
    group_bits: int
    counting: str
    constellation: Constellation
    alphabet: OffsetAlphabet | None = None
    meta: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.X.shape[0]

    @property
    def L(self) -> int:
        return self.X.shape[1]

    @property
    def v_bits(self) -> int:
        return self.group_bits * self.v_symbol.shape[1]

    @property
    def bits_per_use(self) -> int:
        return self.s_bits + self.v_bits

    def bit_errors(self, tx, rx) -> tuple[np.ndarray, np.ndarray]:
        """Per-pair (s bit errors, v bit errors) for hypothesis index arrays."""
        tx = np.asarray(tx)
        rx = np.asarray(rx)
        if self.counting == "symbol":
            es = (self.s_index[tx] != self.s_index[rx]) * self.s_bits
            ev = (self.v_symbol[tx] != self.v_symbol[rx]).sum(axis=-1) * self.group_bits
        else:
            es = np.bitwise_count(self.s_label[tx] ^ self.s_label[rx]).astype(np.int64)
            ev = np.bitwise_count(self.v_label[tx] ^ self.v_label[rx]).sum(axis=-1).astype(np.int64)
        return np.asarray(es, dtype=np.int64), np.asarray(ev, dtype=np.int64)

    def bits_of(self, i: int) -> str | None:
        if self.counting == "symbol":
            return None
        out = self.constellation.label_string(int(self.s_index[i]))
        for lab in self.v_label[i]:
            out += format(int(lab), f"0{self.group_bits}b") if self.group_bits else ""
        return out

    def describe(self, i: int) -> str:
        s = self.constellation.points[self.s_index[i]]
        return f"(s#{int(self.s_index[i])}={s.real:+.4f}{s.imag:+.4f}j, k={tuple(int(k) for k in self.v_symbol[i])})"


def srpm_codebook(alphabet: OffsetAlphabet, constellation: Constellation, L: int) -> Codebook:
    """All (s, k_1..k_L) hypotheses in lexicographic order (s index, then k)."""
    subset = alphabet.transmit_subset
    combos = list(itertools.product(range(constellation.M), *([subset] * L)))
    arr = np.array(combos, dtype=np.int64).reshape(len(combos), L + 1)
    s_idx = arr[:, 0]
    ks = arr[:, 1:]
    X = constellation.points[s_idx][:, None] * alphabet.phase(ks)
    if alphabet.labels is None:
        v_label = np.zeros_like(ks)
        counting = "symbol"
    else:
        lut = dict(zip(subset, alphabet.labels))
        v_label = np.vectorize(lut.__getitem__, otypes=[np.int64])(ks)
        counting = "hamming"
    return Codebook(
        scheme="srpm",
        X=X,
        s_index=s_idx,
        v_symbol=ks,
        s_label=constellation.labels[s_idx],
        v_label=v_label,
        s_bits=constellation.bits,
        group_bits=alphabet.bits,
        counting=counting,
        constellation=constellation,
        alphabet=alphabet,
    )


def codebook_for(cfg: SystemConfig) -> Codebook:
    return srpm_codebook(alphabet_for(cfg), constellation_for(cfg), cfg.L)


@dataclass(frozen=True)
class SrpmSymbol:
    s: complex
    v: np.ndarray
    x: np.ndarray
    s_index: int = 0
    k: tuple[int, ...] = ()
    bits: str | None = None


def modulate(payload, alphabet: OffsetAlphabet, constellation: Constellation, L: int | None = None) -> SrpmSymbol:
    """Map a payload to an SRPM symbol.

    ``payload`` is a bit string / bit sequence in bit-mapped mode (layout:
    ``log2 M`` constellation bits then ``bits`` per sub-surface), or an
    ``(s_index, k_vector)`` pair in either mode.
    """
    if isinstance(payload, tuple) and len(payload) == 2 and not isinstance(payload[0], str):
        s_index, k = int(payload[0]), tuple(int(v) for v in payload[1])
        if not 0 <= s_index < constellation.M:
            raise ValueError("s index out of range")
        if any(kk not in alphabet.transmit_subset for kk in k):
            raise ValueError("offset index not in the transmit subset")
    else:
        if alphabet.labels is None:
            raise ValueError("bit payloads need a bit-mapped alphabet")
        bits = "".join(str(int(b)) for b in payload) if not isinstance(payload, str) else payload
        if L is None:
            L = (len(bits) - constellation.bits) // alphabet.bits if alphabet.bits else 0
        expected = constellation.bits + L * alphabet.bits
        if len(bits) != expected or set(bits) - {"0", "1"}:
            raise ValueError(f"payload must be {expected} bits, got {len(bits)}")
        s_lab = int(bits[: constellation.bits] or "0", 2)
        s_index = int(np.flatnonzero(constellation.labels == s_lab)[0])
        k = []
        for l in range(L):
            start = constellation.bits + l * alphabet.bits
            lab = int(bits[start : start + alphabet.bits] or "0", 2)
            k.append(alphabet.transmit_subset[alphabet.labels.index(lab)])
        k = tuple(k)
    s = complex(constellation.points[s_index])
    v = alphabet.phase(np.array(k))
    bit_str = None
    if alphabet.labels is not None:
        bit_str = constellation.label_string(s_index) + "".join(alphabet.label_string(kk) for kk in k)
    return SrpmSymbol(s=s, v=v, x=s * v, s_index=s_index, k=k, bits=bit_str)


def symbol_from_codebook(codebook: Codebook, i: int) -> SrpmSymbol:
    s_index = int(codebook.s_index[i])
    k = tuple(int(v) for v in codebook.v_symbol[i])
    s = complex(codebook.constellation.points[s_index])
    return SrpmSymbol(s=s, v=codebook.X[i] / s if s != 0 else codebook.X[i], x=codebook.X[i], s_index=s_index, k=k, bits=codebook.bits_of(i))


def hypothesis_index(codebook: Codebook, s_index: int, k) -> int:
    match = (codebook.s_index == s_index) & np.all(codebook.v_symbol == np.asarray(k), axis=1)
    return int(np.flatnonzero(match)[0])


def ml_detect_indices(y: np.ndarray, h: np.ndarray, codebook: Codebook, amplitude: float) -> np.ndarray:
    """Vectorized ML: ``argmin_i |y - amplitude * h @ X[i]|^2`` per row.

    ``y`` has shape (B,), ``h`` shape (B, L).  ``argmin`` returns the first
    minimizer, so ties resolve to the lexicographically first hypothesis.
    """
    y = np.atleast_1d(y)
    h = np.atleast_2d(h)
    means = amplitude * (h @ codebook.X.T)
    dist = np.abs(y[:, None] - means) ** 2
    return np.argmin(dist, axis=1)


def ml_detect(y: complex, h: np.ndarray, codebook: Codebook, amplitude: float) -> tuple[complex, np.ndarray, str | None]:
    """(s_hat, v_hat, bits_hat) for a single observation."""
    i = int(ml_detect_indices(np.array([y]), np.asarray(h)[None, :], codebook, amplitude)[0])
    sym = symbol_from_codebook(codebook, i)
    return sym.s, sym.v, sym.bits


def check_unique_decodability(codebook: Codebook, tol: float = COLLISION_TOL, chunk: int = 128) -> list[tuple[int, int]]:
    """All unordered hypothesis pairs ``(i, j)``, ``i < j``, with identical ``X`` rows."""
    X = codebook.X
    H = X.shape[0]
    out: list[tuple[int, int]] = []
    for start in range(0, H, chunk):
        block = X[start : start + chunk]
        diff = np.max(np.abs(block[:, None, :] - X[None, :, :]), axis=-1)
        ii, jj = np.nonzero(diff <= tol)
        ii = ii + start
        keep = jj > ii
        out.extend(zip(ii[keep].tolist(), jj[keep].tolist()))
    return sorted(out)


def require_unambiguous(codebook: Codebook) -> None:
    collisions = check_unique_decodability(codebook)
    if collisions:
        raise AmbiguousCodebookError(collisions, codebook)


def count_bit_errors(tx: SrpmSymbol, rx: SrpmSymbol, codebook: Codebook) -> tuple[int, int]:
    """(s bit errors, v bit errors) between two symbols of ``codebook``."""
    i = hypothesis_index(codebook, tx.s_index, tx.k)
    j = hypothesis_index(codebook, rx.s_index, rx.k)
    es, ev = codebook.bit_errors(np.array([i]), np.array([j]))
    return int(es[0]), int(ev[0])


def codebook_table(codebook: Codebook) -> str:
    """Text dump: one row per hypothesis (index, s-index, k-vector, x, label)."""
    rows = ["# idx s_index k x label"]
    for i in range(codebook.size):
        x = " ".join(f"{z.real:+.6f}{z.imag:+.6f}j" for z in codebook.X[i])
        k = ",".join(str(int(v)) for v in codebook.v_symbol[i])
        rows.append(f"{i} {int(codebook.s_index[i])} [{k}] [{x}] {codebook.bits_of(i) or '-'}")
    return "\n".join(rows) + "\n"
