"""s- and v-message ABER under von Mises phase noise, L = 1 and L = 2."""

import numpy as np

from _common import parser, rule, write
from srpm import SystemConfig, estimate_aber


def main():
    args = parser(__doc__).parse_args()
    grid = np.arange(-40.0, 41.0, 5.0)
    for L in (1, 2):
        for kappa in (None, 10.0, 20.0):
            cfg = SystemConfig(L=L, phase_noise_kappa=kappa)
            tag = f"L{L}_" + ("clean" if kappa is None else f"k{kappa:g}")
            write(args, f"fig4_{tag}.csv", estimate_aber(cfg, grid, rule(args), workers=args.workers).to_csv())


if __name__ == "__main__":
    main()
