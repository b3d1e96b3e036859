"""Effect of N, Nt and L: bound and Monte Carlo curves."""

import numpy as np

from _common import parser, rule, write
from srpm import SystemConfig, db_to_linear, estimate_aber, union_bound_aber

VARIANTS = {
    "base": {},
    "2N": dict(N=256),
    "2Nt": dict(Nt=16),
    "L3": dict(L=3, N=126),
    "L4": dict(L=4),
}


def main():
    args = parser(__doc__).parse_args()
    grid = np.arange(0.0, 31.0, 2.0)
    for name, kw in VARIANTS.items():
        cfg = SystemConfig(**kw)
        write(args, f"fig2_bound_{name}.csv", union_bound_aber(cfg, db_to_linear(grid)).to_csv())
        write(args, f"fig2_mc_{name}.csv", estimate_aber(cfg, grid, rule(args), workers=args.workers).to_csv())


if __name__ == "__main__":
    main()
