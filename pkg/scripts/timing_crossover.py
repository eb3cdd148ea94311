#!/usr/bin/env python3
"""Measure fast-vs-direct wall time over doubling particle counts.

Prints the per-size table and the crossover point where the hierarchical
evaluation wins for good.
"""

import argparse
import sys

from vortexfmm.harness import TIMING_HEADER, timing_study


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--max-exp", type=int, default=15, help="largest n = 2**max_exp")
    parser.add_argument("--p", type=int, default=8)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--direct-cutoff", type=int, default=8192)
    parser.add_argument("--out", default="timing.csv")
    args = parser.parse_args()

    rows = timing_study(
        [2**k for k in range(8, args.max_exp + 1)],
        p=args.p,
        repeats=args.repeats,
        direct_cutoff=args.direct_cutoff,
        out_path=args.out,
    )
    print(TIMING_HEADER)
    for row in rows:
        print(row.csv_row())

    crossover = next((r.n for r in rows if r.t_fmm_ms < r.t_direct_ms), None)
    if crossover is None:
        print("no crossover in the scanned range")
    else:
        print(f"\nfast evaluation wins from n = {crossover} on "
              f"(direct timings extrapolated above n = {args.direct_cutoff})")
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
