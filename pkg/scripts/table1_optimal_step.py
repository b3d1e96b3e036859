"""Optimal phase-offset step per K for QPSK and 16QAM with 4-bit base phases."""

from _common import parser, write
from srpm import SystemConfig
from srpm.search import DEFAULT_PINNED_SNR_DB, format_table, table_rows


def main():
    p = parser(__doc__)
    p.add_argument("--snr", type=float, default=DEFAULT_PINNED_SNR_DB)
    args = p.parse_args()
    rows = {}
    for label, kw in (("QPSK", dict(M=4, constellation_kind="psk")), ("16QAM", dict(M=16, constellation_kind="qam"))):
        results = table_rows(SystemConfig(quantization_bits=4, **kw), range(1, 8), pinned_snr_db=args.snr)
        rows[label] = results
        for r in results:
            write(args, f"table1_{label}_K{r.K}.csv", r.to_csv())
    text = format_table(rows)
    print(text, end="")
    write(args, "table1.txt", text)


if __name__ == "__main__":
    main()
