"""Union bound against Monte Carlo for several (K, step) settings."""

import math

import numpy as np

from _common import parser, rule, write
from srpm import SystemConfig, db_to_linear, estimate_aber, union_bound_aber

SETTINGS = [(1, 3), (2, 3), (3, 3), (1, 2)]  # (K, step in pi/16 units)


def main():
    args = parser(__doc__).parse_args()
    grid = np.arange(0.0, 31.0, 2.0)
    for K, k16 in SETTINGS:
        cfg = SystemConfig(K=K, delta_theta=k16 * math.pi / 16)
        tag = f"K{K}_d{k16}pi16"
        write(args, f"fig1_bound_{tag}.csv", union_bound_aber(cfg, db_to_linear(grid)).to_csv())
        write(args, f"fig1_mc_{tag}.csv", estimate_aber(cfg, grid, rule(args), workers=args.workers).to_csv())


if __name__ == "__main__":
    main()
