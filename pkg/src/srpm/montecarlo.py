"""Monte Carlo ABER engine with deterministic, worker-count independent streams.

Trials are grouped into fixed-size blocks.  Block ``b`` draws its channels,
payloads, noise and phase noise from the stream ``(seed, b)``, so trial ``i``
always sees the same randomness no matter how blocks are distributed.  The
same draws are reused at every SNR point (common random numbers); only the
transmit power changes.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from statsmodels.stats.proportion import proportion_confint

from .beamforming import scalar_gains
from .benchmarks import pbit_codebook, rpm_codebook
from .channel import make_rng, sample_rayleigh_channel, sample_von_mises
from .config import SystemConfig, db_to_linear
from .modem import Codebook, codebook_for, constellation_for, ml_detect_indices, require_unambiguous

BLOCK_SIZE = 4096
_DETECT_CHUNK = 1 << 21


@dataclass(frozen=True)
class StoppingRule:
    max_trials: int = 10_000_000
    target_bit_errors: int = 200
    min_trials: int = 0

    def __post_init__(self) -> None:
        if self.max_trials < 1:
            raise ValueError("max_trials must be >= 1")


@dataclass
class AberReport:
    snr_grid_db: np.ndarray
    trials: np.ndarray
    bit_errors: np.ndarray
    s_errors: np.ndarray
    v_errors: np.ndarray
    s_bits: int
    v_bits: int
    scheme: str = "SRPM"
    config: dict = field(default_factory=dict)
    config_hash: str = ""

    @property
    def bits_per_use(self) -> int:
        return self.s_bits + self.v_bits

    def _rate(self, errors, bits_per_trial):
        if bits_per_trial == 0:
            return np.full(len(errors), np.nan)
        return errors / (self.trials * bits_per_trial)

    @property
    def joint_ber(self) -> np.ndarray:
        return self._rate(self.bit_errors, self.bits_per_use)

    @property
    def s_ber(self) -> np.ndarray:
        return self._rate(self.s_errors, self.s_bits)

    @property
    def v_ber(self) -> np.ndarray:
        return self._rate(self.v_errors, self.v_bits)

    def wilson_ci95(self, which: str = "joint") -> tuple[np.ndarray, np.ndarray]:
        errors, bits = {
            "joint": (self.bit_errors, self.bits_per_use),
            "s": (self.s_errors, self.s_bits),
            "v": (self.v_errors, self.v_bits),
        }[which]
        lo, hi = proportion_confint(errors, self.trials * bits, alpha=0.05, method="wilson")
        return np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)

    @property
    def one_sided(self) -> np.ndarray:
        """Points with zero errors, whose interval is only an upper limit."""
        return self.bit_errors == 0

    def to_csv(self, header: list[str] | None = None) -> str:
        lines = [f"# {h}" for h in (header or [])]
        lines.append(f"# scheme={self.scheme} bits_per_use={self.bits_per_use} config_hash={self.config_hash}")
        lines.append("snr_db,joint,s,v,trials,errors,ci_lo,ci_hi")
        lo, hi = self.wilson_ci95()
        for k in range(len(self.snr_grid_db)):
            lines.append(
                f"{self.snr_grid_db[k]:.6g},{self.joint_ber[k]:.9e},{self.s_ber[k]:.9e},{self.v_ber[k]:.9e},"
                f"{int(self.trials[k])},{int(self.bit_errors[k])},{lo[k]:.9e},{hi[k]:.9e}"
            )
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        lo, hi = self.wilson_ci95()
        payload = {
            "scheme": self.scheme,
            "config_hash": self.config_hash,
            "config": self.config,
            "bits_per_use": self.bits_per_use,
            "s_bits": self.s_bits,
            "v_bits": self.v_bits,
            "snr_db": self.snr_grid_db.tolist(),
            "joint_ber": self.joint_ber.tolist(),
            "s_ber": np.nan_to_num(self.s_ber, nan=0.0).tolist(),
            "v_ber": np.nan_to_num(self.v_ber, nan=0.0).tolist(),
            "trials": self.trials.tolist(),
            "bit_errors": self.bit_errors.tolist(),
            "s_errors": self.s_errors.tolist(),
            "v_errors": self.v_errors.tolist(),
            "ci95": [lo.tolist(), hi.tolist()],
            "one_sided": self.one_sided.tolist(),
        }
        return json.dumps(payload, indent=2)


def apply_phase_noise(phases, kappa: float, rng: np.random.Generator) -> np.ndarray:
    """Add an independent von Mises(0, kappa) error to every phase."""
    if kappa <= 0:
        raise ValueError("kappa must be > 0")
    phases = np.asarray(phases, dtype=float)
    return phases + sample_von_mises(kappa, rng, phases.shape)


@dataclass
class _Block:
    h: np.ndarray
    g: np.ndarray
    tx: np.ndarray
    z: np.ndarray


def _draw_block(cfg: SystemConfig, H: int, block: int) -> _Block:
    # draw order is part of the reproducibility contract
    rng = make_rng(cfg.seed, block)
    hr = sample_rayleigh_channel((BLOCK_SIZE, cfg.N), rng)
    tx = rng.integers(0, H, BLOCK_SIZE)
    z = sample_rayleigh_channel(BLOCK_SIZE, rng)
    eps = None
    if cfg.phase_noise_kappa is not None:
        eps = apply_phase_noise(np.zeros((BLOCK_SIZE, cfg.N)), cfg.phase_noise_kappa, rng)
    h, g = scalar_gains(cfg, hr, eps)
    return _Block(h=h, g=g, tx=tx, z=z)


def _detect(block: _Block, codebook: Codebook, cfg: SystemConfig, snr: float) -> np.ndarray:
    amp = math.sqrt(snr * cfg.sigma2 * cfg.Nt) * cfg.beta
    signal = np.einsum("bl,bl->b", block.g, codebook.X[block.tx])
    y = amp * signal + math.sqrt(cfg.sigma2) * block.z
    rows = max(1, _DETECT_CHUNK // codebook.size)
    out = np.empty(BLOCK_SIZE, dtype=np.int64)
    for start in range(0, BLOCK_SIZE, rows):
        sl = slice(start, start + rows)
        out[sl] = ml_detect_indices(y[sl], block.h[sl], codebook, amp)
    return out


def _block_errors(cfg: SystemConfig, codebook: Codebook, snrs, block: int):
    """Per-trial (s, v) error arrays for one block at each requested SNR."""
    data = _draw_block(cfg, codebook.size, block)
    out = []
    for snr in snrs:
        rx = _detect(data, codebook, cfg, snr)
        es, ev = codebook.bit_errors(data.tx, rx)
        out.append((es, ev))
    return out


@dataclass(frozen=True)
class TrialOutcome:
    tx: int
    rx: int
    tx_bits: str | None
    rx_bits: str | None
    errors_s: int
    errors_v: int


def run_trial(cfg: SystemConfig, snr: float, trial_index: int, codebook: Codebook | None = None) -> TrialOutcome:
    """Reproduce a single trial of the engine (linear ``snr``)."""
    codebook = codebook if codebook is not None else codebook_for(cfg)
    block, row = divmod(int(trial_index), BLOCK_SIZE)
    data = _draw_block(cfg, codebook.size, block)
    rx = _detect(data, codebook, cfg, snr)
    tx, r = int(data.tx[row]), int(rx[row])
    es, ev = codebook.bit_errors(np.array([tx]), np.array([r]))
    return TrialOutcome(tx, r, codebook.bits_of(tx), codebook.bits_of(r), int(es[0]), int(ev[0]))


def _scheme_tag(cfg: SystemConfig, codebook: Codebook) -> str:
    if codebook.scheme != "srpm":
        return codebook.scheme.upper()
    if cfg.offset_indices == (0, 1) and math.isclose(cfg.delta_theta, math.pi / 2):
        return "QRM-via-SRPM"
    return "SRPM"


def estimate_aber(
    cfg: SystemConfig,
    snr_grid_db,
    rule: StoppingRule | None = None,
    codebook: Codebook | None = None,
    workers: int = 1,
    allow_ambiguous: bool = False,
) -> AberReport:
    """Monte Carlo joint / s / v bit error rates over an SNR grid in dB.

    Each point runs whole blocks until ``target_bit_errors`` joint bit errors
    have been seen or ``max_trials`` trials are used (the last block is
    truncated).  The result does not depend on ``workers``.
    """
    rule = rule or StoppingRule()
    codebook = codebook if codebook is not None else codebook_for(cfg)
    if not allow_ambiguous:
        require_unambiguous(codebook)
    snr_db = np.atleast_1d(np.asarray(snr_grid_db, dtype=float))
    snrs = db_to_linear(snr_db)
    P = len(snrs)
    trials = np.zeros(P, dtype=np.int64)
    es_tot = np.zeros(P, dtype=np.int64)
    ev_tot = np.zeros(P, dtype=np.int64)
    active = np.ones(P, dtype=bool)

    def done(k: int) -> bool:
        if trials[k] >= rule.max_trials:
            return True
        return trials[k] >= rule.min_trials and es_tot[k] + ev_tot[k] >= rule.target_bit_errors

    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        block = 0
        while active.any():
            idx = np.flatnonzero(active)
            wave = list(range(block, block + max(1, workers)))
            block += len(wave)
            args = [(cfg, codebook, snrs[idx], b) for b in wave]
            if pool is None:
                results = [_block_errors(*a) for a in args]
            else:
                results = list(pool.map(_block_errors, *zip(*args)))
            for res in results:
                for pos, k in enumerate(idx):
                    if not active[k]:
                        continue
                    es, ev = res[pos]
                    take = min(BLOCK_SIZE, rule.max_trials - int(trials[k]))
                    trials[k] += take
                    es_tot[k] += int(es[:take].sum())
                    ev_tot[k] += int(ev[:take].sum())
                    if done(k):
                        active[k] = False
    finally:
        if pool is not None:
            pool.shutdown()
    return AberReport(
        snr_grid_db=snr_db,
        trials=trials,
        bit_errors=es_tot + ev_tot,
        s_errors=es_tot,
        v_errors=ev_tot,
        s_bits=codebook.s_bits,
        v_bits=codebook.v_bits,
        scheme=_scheme_tag(cfg, codebook),
        config=cfg.to_dict(),
        config_hash=cfg.config_hash(),
    )


def benchmark_codebook(scheme: str, cfg: SystemConfig) -> Codebook:
    scheme = scheme.lower()
    if scheme == "pbit":
        return pbit_codebook(constellation_for(cfg), cfg.L)
    if scheme == "rpm":
        return rpm_codebook(constellation_for(cfg), cfg.L)
    raise ValueError(f"unknown benchmark scheme {scheme!r}")


def simulate_benchmark(scheme: str, cfg: SystemConfig, snr_grid_db, rule: StoppingRule | None = None, workers: int = 1) -> AberReport:
    """PBIT or RIS-RPM over the same channels and detector as SRPM.

    PBIT has inherently identical signals (all sub-surfaces OFF), so no
    ambiguity check is applied.  RIS-QRM is plain SRPM with offsets {0, 1}
    and step pi/2 and goes through :func:`estimate_aber`.
    """
    return estimate_aber(cfg, snr_grid_db, rule, benchmark_codebook(scheme, cfg), workers, allow_ambiguous=True)
