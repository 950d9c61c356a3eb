#!/usr/bin/env python3
"""Sharpness sweep on the disk-plus-needle sets V_delta.

Prints capacity, needle mass, and the discrepancy-to-sqrt(eps) ratio for
each delta; the ratio stays above 2/(3 pi) all the way down, which is
what makes the sqrt rate unimprovable.
"""

import argparse
import math

from convexortho.experiments import ExperimentConfig, run


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument(
        "--deltas", type=float, nargs="+", default=[0.5, 0.2, 0.1, 0.05, 0.02]
    )
    ap.add_argument("--out", default="out/sharpness")
    args = ap.parse_args()

    cfg = ExperimentConfig(
        kind="sharpness", domain="disk", deltas=tuple(args.deltas), out_dir=args.out
    )
    rep = run(cfg)
    print(f"wrote {rep.csv_path}")
    print(f"{'delta':>8} {'capacity':>14} {'mass':>10} {'D':>10} {'D/sqrt(eps)':>12}")
    for r in rep.records:
        print(
            f"{r['delta']:>8.3g} {r['capacity']:>14.10f} {r['interval_mass']:>10.6f} "
            f"{r['D']:>10.6f} {r['ratio']:>12.6f}"
        )
    print(f"floor 2/(3 pi) = {2 / (3 * math.pi):.6f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
