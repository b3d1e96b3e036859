"""Command-line batch interface."""

from __future__ import annotations

import argparse
import datetime as _dt
import math
import sys
from pathlib import Path

import numpy as np

from .analysis import EnumerationCapError, union_bound_aber
from .config import ConfigError, SystemConfig, config_from_mapping, db_to_linear, load_config, parse_angle
from .modem import AmbiguousCodebookError, check_unique_decodability, codebook_for, codebook_table, require_unambiguous
from .montecarlo import StoppingRule, estimate_aber, simulate_benchmark
from .search import DEFAULT_GRID, DEFAULT_PINNED_SNR_DB, AllCandidatesAmbiguousError, format_table, sweep_k_delta, table_rows


def parse_snr_range(text: str) -> np.ndarray:
    """``start:stop:step`` in dB, stop inclusive; a bare number is a single point."""
    parts = text.split(":")
    if len(parts) == 1:
        return np.array([float(parts[0])])
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"bad SNR range {text!r}; expected start:stop:step")
    start, stop, step = (float(p) for p in parts)
    if step <= 0 or stop < start:
        raise argparse.ArgumentTypeError(f"bad SNR range {text!r}")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


def parse_int_list(text: str) -> list[int]:
    """``1,2,5`` or ``1..7``."""
    text = text.strip()
    if not text:
        return []
    if ".." in text:
        a, b = text.split("..")
        return list(range(int(a), int(b) + 1))
    return [int(v) for v in text.replace(",", " ").split()]


def parse_angle_list(text: str) -> list[float]:
    return [parse_angle(v) for v in text.split(",") if v.strip()]


_OVERRIDES = {
    "N": "N",
    "Nt": "Nt",
    "L": "L",
    "M": "M",
    "K": "K",
    "delta_theta": "delta_theta",
    "bits": "quantization_bits",
    "bit_mode": "bit_mode",
    "kind": "constellation_kind",
    "beta": "beta",
    "seed": "seed",
    "kappa": "phase_noise_kappa",
    "offsets": "offset_indices",
}


def build_config(args: argparse.Namespace) -> SystemConfig:
    base = load_config(args.config) if args.config else SystemConfig()
    values = {}
    for opt, key in _OVERRIDES.items():
        v = getattr(args, opt, None)
        if v is not None:
            values[key] = v
    return config_from_mapping(values, base)


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--N", type=int)
    p.add_argument("--Nt", type=int)
    p.add_argument("--L", type=int)
    p.add_argument("--M", type=int)
    p.add_argument("--K", type=int)
    p.add_argument("--delta-theta", dest="delta_theta", type=parse_angle, help="e.g. 3pi/16 or 0.589")
    p.add_argument("--bits", type=int, help="base-phase quantization bits")
    p.add_argument("--bit-mode", dest="bit_mode", choices=("full", "mapped"))
    p.add_argument("--kind", choices=("psk", "qam"), help="constellation family")
    p.add_argument("--beta", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--kappa", type=float, help="von Mises phase-noise concentration")
    p.add_argument("--offsets", type=lambda s: tuple(parse_int_list(s)), help="explicit offset index set, e.g. 0,1")
    p.add_argument("--out", help="output file (default stdout)")


def _header(args: argparse.Namespace, cfg: SystemConfig) -> list[str]:
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return [
        f"srpm {args.command}",
        f"config_hash={cfg.config_hash()}",
        f"config={' '.join(f'{k}={v}' for k, v in cfg.to_dict().items())}",
        f"timestamp={stamp}",
    ]


def _emit(args: argparse.Namespace, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(text)


def cmd_theory(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    cb = codebook_for(cfg)
    if args.collisions == "exclude":
        require_unambiguous(cb)
    res = union_bound_aber(cfg, db_to_linear(args.snr), cb, collisions=args.collisions)
    _emit(args, res.to_csv(_header(args, cfg)))
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    rule = StoppingRule(max_trials=args.max_trials, target_bit_errors=args.target_errors)
    if args.scheme in ("pbit", "rpm"):
        report = simulate_benchmark(args.scheme, cfg, args.snr, rule, workers=args.workers)
    else:
        qrm = args.scheme == "qrm"
        if qrm:
            cfg = cfg.replace(offset_indices=(0, 1), delta_theta=math.pi / 2)
            found = check_unique_decodability(codebook_for(cfg))
            if found:
                print(f"note: QRM signal set has {len(found)} colliding pair(s); simulating anyway", file=sys.stderr)
        report = estimate_aber(cfg, args.snr, rule, workers=args.workers, allow_ambiguous=qrm)
    if args.format == "json":
        _emit(args, report.to_json() + "\n")
    else:
        _emit(args, report.to_csv(_header(args, cfg)))
    return 0


def cmd_search(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    ks = parse_int_list(args.k_list)
    if not ks:
        print("error: --k-list must name at least one K", file=sys.stderr)
        return 2
    grid = parse_angle_list(args.grid) if args.grid else DEFAULT_GRID
    rule = StoppingRule(max_trials=args.max_trials, target_bit_errors=args.target_errors)
    rows = {}
    kinds = [(cfg.constellation_kind, cfg.M)] if args.rows is None else [_parse_row(r) for r in args.rows.split(",")]
    for kind, M in kinds:
        label = f"{M}{'PSK' if kind == 'psk' else 'QAM'}" if M != 4 or kind != "psk" else "QPSK"
        rows[label] = table_rows(
            cfg.replace(constellation_kind=kind, M=M),
            ks,
            grid=grid,
            pinned_snr_db=args.snr,
            objective_kind=args.objective,
            ambiguity=args.ambiguity,
            rule=rule,
            workers=args.workers,
        )
        for r in rows[label]:
            if r.ambiguous:
                print(f"{label} K={r.K}: {len(r.ambiguous)} ambiguous candidate(s)", file=sys.stderr)
    text = "".join(f"# {h}\n" for h in _header(args, cfg))
    text += f"# objective={args.objective} pinned_snr_db={args.snr:g} ambiguity={args.ambiguity}\n"
    _emit(args, text + format_table(rows))
    return 0


def _parse_row(text: str) -> tuple[str, int]:
    text = text.strip().lower()
    if text == "qpsk":
        return "psk", 4
    for kind in ("psk", "qam"):
        if text.endswith(kind):
            return kind, int(text[: -len(kind)])
    raise argparse.ArgumentTypeError(f"bad modulation {text!r}; use e.g. qpsk, 8psk, 16qam")


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    ks = parse_int_list(args.k_list)
    if not ks:
        print("error: --k-list must name at least one K", file=sys.stderr)
        return 2
    deltas = parse_angle_list(args.grid) if args.grid else list(DEFAULT_GRID)
    res = sweep_k_delta(cfg, ks, deltas, args.snr)
    _emit(args, res.to_csv(_header(args, cfg)))
    return 0


def cmd_ambiguity(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    cb = codebook_for(cfg)
    found = check_unique_decodability(cb)
    if not found:
        _emit(args, "codebook uniquely decodable\n")
        return 0
    lines = [f"{len(found)} colliding pair(s)"]
    lines += [f"{i} {j}  {cb.describe(i)}  ==  {cb.describe(j)}" for i, j in found]
    _emit(args, "\n".join(lines) + "\n")
    return 0


def cmd_codebook(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    _emit(args, codebook_table(codebook_for(cfg)))
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="srpm", description="SRPM RIS-MISO link simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("theory", help="union-bound ABER curve (CSV)")
    _add_config_args(p)
    p.add_argument("--snr", type=parse_snr_range, default=parse_snr_range("0:40:2"), help="dB start:stop:step")
    p.add_argument("--collisions", choices=("exclude", "include"), default="exclude")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("simulate", help="Monte Carlo ABER (CSV or JSON)")
    _add_config_args(p)
    p.add_argument("--snr", type=parse_snr_range, default=parse_snr_range("0:30:5"))
    p.add_argument("--scheme", choices=("srpm", "pbit", "rpm", "qrm"), default="srpm")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--max-trials", dest="max_trials", type=int, default=StoppingRule().max_trials)
    p.add_argument("--target-errors", dest="target_errors", type=int, default=StoppingRule().target_bit_errors)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_simulate)

    for name, func, help_ in (
        ("search", cmd_search, "optimal step per K (table)"),
        ("sweep", cmd_sweep, "objective over a (K, step) grid (CSV)"),
    ):
        p = sub.add_parser(name, help=help_)
        _add_config_args(p)
        p.add_argument("--k-list", dest="k_list", default="1..7", help="e.g. 1..7 or 1,2,3")
        p.add_argument("--grid", help="comma-separated steps, e.g. pi/16,pi/8")
        p.add_argument("--snr", type=float, default=DEFAULT_PINNED_SNR_DB, help="pinned SNR in dB")
        p.set_defaults(func=func)
        if name == "search":
            p.add_argument("--rows", help="modulations, e.g. qpsk,16qam (default: config)")
            p.add_argument("--objective", choices=("bound", "simulated"), default="bound")
            p.add_argument("--ambiguity", choices=("include", "skip"), default="include")
            p.add_argument("--workers", type=int, default=1)
            p.add_argument("--max-trials", dest="max_trials", type=int, default=200_000)
            p.add_argument("--target-errors", dest="target_errors", type=int, default=StoppingRule().target_bit_errors)

    p = sub.add_parser("ambiguity", help="list colliding hypothesis pairs")
    _add_config_args(p)
    p.set_defaults(func=cmd_ambiguity)

    p = sub.add_parser("codebook", help="dump the codebook")
    _add_config_args(p)
    p.set_defaults(func=cmd_codebook)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AmbiguousCodebookError as exc:
        print(str(exc), file=sys.stderr)
        return 3
    except (ConfigError, EnumerationCapError, AllCandidatesAmbiguousError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
