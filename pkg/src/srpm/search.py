"""Exhaustive search of the phase-offset step on a discrete grid."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .analysis import union_bound_aber
from .config import SystemConfig, db_to_linear
from .modem import check_unique_decodability, codebook_for

# Candidate steps k*pi/16, k = 1..8.
DEFAULT_GRID = tuple(k * math.pi / 16 for k in range(1, 9))
# At high SNR the bound is set by zero-mean swap pairs that do not depend on
# the step, so the ranking is taken where the offset spread still matters.
DEFAULT_PINNED_SNR_DB = -22.0


class AllCandidatesAmbiguousError(ValueError):
    pass


@dataclass
class DeltaSearchResult:
    grid: list[float]
    objective: np.ndarray
    best: float
    ambiguous: list[float] = field(default_factory=list)
    collisions: dict[float, list[tuple[int, int]]] = field(default_factory=dict)
    pinned_snr_db: float = DEFAULT_PINNED_SNR_DB
    objective_kind: str = "bound"
    K: int | None = None

    @property
    def best_index(self) -> int:
        return self.grid.index(self.best)

    def to_csv(self, header: list[str] | None = None) -> str:
        lines = [f"# {h}" for h in (header or [])]
        lines.append(f"# objective={self.objective_kind} pinned_snr_db={self.pinned_snr_db:g} best={self.best:.12g}")
        lines.append("delta_theta,objective,ambiguous_flag")
        amb = set(self.ambiguous)
        for d, v in zip(self.grid, self.objective):
            lines.append(f"{d:.12g},{v:.12e},{int(d in amb)}")
        return "\n".join(lines) + "\n"


def format_angle(theta: float, denominator: int = 16) -> str:
    """``theta`` as a reduced multiple of pi, e.g. ``3π/8``; falls back to radians."""
    k = theta * denominator / math.pi
    if abs(k - round(k)) > 1e-9:
        return f"{theta:.6g}"
    f = Fraction(int(round(k)), denominator)
    num = "" if f.numerator == 1 else str(f.numerator)
    return f"{num}π" if f.denominator == 1 else f"{num}π/{f.denominator}"


def _objective(cfg: SystemConfig, snr_db: float, kind: str, collisions: str, rule, workers: int) -> float:
    if kind == "bound":
        return float(union_bound_aber(cfg, db_to_linear(snr_db), collisions=collisions).bound[0])
    if kind == "simulated":
        from .montecarlo import estimate_aber

        return float(estimate_aber(cfg, [snr_db], rule, workers=workers, allow_ambiguous=True).joint_ber[0])
    raise ValueError("objective_kind must be 'bound' or 'simulated'")


def search_optimal_delta(
    cfg: SystemConfig,
    grid=DEFAULT_GRID,
    pinned_snr_db: float = DEFAULT_PINNED_SNR_DB,
    objective_kind: str = "bound",
    ambiguity: str = "include",
    rule=None,
    workers: int = 1,
) -> DeltaSearchResult:
    """Evaluate every candidate step and return the minimizer.

    Ambiguous candidates are always recorded.  With ``ambiguity="skip"`` they
    are not evaluated; with ``"include"`` they compete with colliding pairs
    charged an error probability of 1/2.  Ties go to the smaller step.
    """
    grid = [float(d) for d in grid]
    if not grid:
        raise ValueError("grid must be nonempty")
    if ambiguity not in ("skip", "include"):
        raise ValueError("ambiguity must be 'skip' or 'include'")
    values = np.full(len(grid), np.inf)
    ambiguous: list[float] = []
    collisions: dict[float, list[tuple[int, int]]] = {}
    for idx, d in enumerate(grid):
        c = cfg.replace(delta_theta=d)
        found = check_unique_decodability(codebook_for(c))
        if found:
            ambiguous.append(d)
            collisions[d] = found
            if ambiguity == "skip":
                continue
        values[idx] = _objective(c, pinned_snr_db, objective_kind, "include", rule, workers)
    if not np.isfinite(values).any():
        raise AllCandidatesAmbiguousError(f"all {len(grid)} candidates give ambiguous codebooks")
    best_val = values.min()
    # smallest step among exact ties
    tied = [d for d, v in zip(grid, values) if v == best_val]
    best = min(tied)
    return DeltaSearchResult(
        grid=grid,
        objective=values,
        best=best,
        ambiguous=ambiguous,
        collisions=collisions,
        pinned_snr_db=pinned_snr_db,
        objective_kind=objective_kind,
        K=cfg.K,
    )


@dataclass
class SweepResult:
    k_values: list[int]
    delta_values: list[float]
    objective: np.ndarray
    ambiguous: np.ndarray
    snr_db: float

    def to_csv(self, header: list[str] | None = None) -> str:
        lines = [f"# {h}" for h in (header or [])]
        lines.append(f"# snr_db={self.snr_db:g}")
        lines.append("K,delta_theta,objective,ambiguous_flag")
        for a, K in enumerate(self.k_values):
            for b, d in enumerate(self.delta_values):
                lines.append(f"{K},{d:.12g},{self.objective[a, b]:.12e},{int(self.ambiguous[a, b])}")
        return "\n".join(lines) + "\n"


def sweep_k_delta(cfg: SystemConfig, k_values, delta_values, snr_db: float, collisions: str = "include") -> SweepResult:
    """Union-bound objective on the full (K, step) grid, ambiguous cells flagged."""
    k_values = [int(k) for k in k_values]
    delta_values = [float(d) for d in delta_values]
    obj = np.empty((len(k_values), len(delta_values)))
    amb = np.zeros(obj.shape, dtype=bool)
    for a, K in enumerate(k_values):
        for b, d in enumerate(delta_values):
            c = cfg.replace(K=K, delta_theta=d)
            res = union_bound_aber(c, db_to_linear(snr_db), collisions=collisions)
            obj[a, b] = res.bound[0]
            amb[a, b] = bool(res.collisions)
    return SweepResult(k_values, delta_values, obj, amb, snr_db)


def table_rows(cfg: SystemConfig, k_values, **kwargs) -> list[DeltaSearchResult]:
    k_values = list(k_values)
    if not k_values:
        raise ValueError("K list must be nonempty")
    return [search_optimal_delta(cfg.replace(K=int(K)), **kwargs) for K in k_values]


def format_table(rows: dict[str, list[DeltaSearchResult]]) -> str:
    """Table of optimal steps, one line per modulation label, one column per K."""
    first = next(iter(rows.values()))
    ks = [r.K for r in first]
    width = 8
    out = ["K".ljust(8) + "".join(str(k).rjust(width) for k in ks)]
    for label, results in rows.items():
        out.append(label.ljust(8) + "".join(format_angle(r.best).rjust(width) for r in results))
    return "\n".join(out) + "\n"
