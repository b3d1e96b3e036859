"""Shared helpers for the experiment scripts."""

import argparse
from pathlib import Path

from srpm.montecarlo import StoppingRule


def parser(description: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--out-dir", default="results", help="directory for CSV output")
    p.add_argument("--max-trials", type=int, default=2_000_000)
    p.add_argument("--target-errors", type=int, default=200)
    p.add_argument("--workers", type=int, default=1)
    return p


def rule(args) -> StoppingRule:
    return StoppingRule(max_trials=args.max_trials, target_bit_errors=args.target_errors)


def write(args, name: str, text: str) -> None:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)
    print(f"wrote {out / name}")
