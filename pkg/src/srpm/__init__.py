"""Superimposed RIS-phase modulation (SRPM) link-level simulator."""

from .analysis import AberBound, union_bound_aber
from .config import SystemConfig, db_to_linear, linear_to_db, load_config
from .modem import AmbiguousCodebookError, Codebook, codebook_for
from .montecarlo import AberReport, StoppingRule, estimate_aber, simulate_benchmark
from .search import DeltaSearchResult, search_optimal_delta, sweep_k_delta

__version__ = "0.1.0"

__all__ = [
    "AberBound",
    "AberReport",
    "AmbiguousCodebookError",
    "Codebook",
    "DeltaSearchResult",
    "StoppingRule",
    "SystemConfig",
    "codebook_for",
    "db_to_linear",
    "estimate_aber",
    "linear_to_db",
    "load_config",
    "search_optimal_delta",
    "simulate_benchmark",
    "sweep_k_delta",
    "union_bound_aber",
]
