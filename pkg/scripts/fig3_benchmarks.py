"""SRPM against PBIT, RIS-RPM and RIS-QRM over the same channels."""

import math

import numpy as np

from _common import parser, rule, write
from srpm import SystemConfig, estimate_aber, simulate_benchmark


def main():
    args = parser(__doc__).parse_args()
    grid = np.arange(0.0, 31.0, 2.0)
    cfg = SystemConfig()
    write(args, "fig3_srpm.csv", estimate_aber(cfg, grid, rule(args), workers=args.workers).to_csv())
    write(args, "fig3_srpm_mapped.csv",
          estimate_aber(cfg.replace(bit_mode="mapped"), grid, rule(args), workers=args.workers).to_csv())
    for scheme, c in (("pbit", cfg), ("rpm", cfg), ("rpm_L4", cfg.replace(L=4))):
        rep = simulate_benchmark(scheme.split("_")[0], c, grid, rule(args), workers=args.workers)
        write(args, f"fig3_{scheme}.csv", rep.to_csv())
    qrm = cfg.replace(offset_indices=(0, 1), delta_theta=math.pi / 2)
    write(args, "fig3_qrm.csv", estimate_aber(qrm, grid, rule(args), workers=args.workers, allow_ambiguous=True).to_csv())


if __name__ == "__main__":
    main()
