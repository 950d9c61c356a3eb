#!/usr/bin/env python3
"""Discrepancy and Faber sweeps over regular N-gons.

Writes one CSV/JSON pair per domain and kind under --out, then prints
the fitted constants that summarize the rate picture: the sqrt(log n/n)
ratio window, the global D <= C sqrt(eps) constant, and the Faber norm
ceilings.
"""

import argparse
import math

from convexortho.experiments import ExperimentConfig, run


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sides", type=int, nargs="+", default=[4, 5, 6])
    ap.add_argument("--n-max", type=int, default=40)
    ap.add_argument("--out", default="out/ngon-suite")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--no-cache", action="store_true")
    args = ap.parse_args()

    c_by_domain = {}
    for k in args.sides:
        domain = f"ngon:{k}"
        cfg = ExperimentConfig(
            kind="rate-check",
            domain=domain,
            n_min=1,
            n_max=args.n_max,
            out_dir=args.out,
            cache=not args.no_cache,
            jobs=args.jobs,
        )
        rep = run(cfg)
        c_by_domain[domain] = rep.constants["C_sqrt_eps_max"]
        window = [r["ratio_lognn"] for r in rep.records if 5 <= r["n"] <= args.n_max]
        print(f"{domain}: wrote {rep.csv_path}")
        print(
            f"  C_sqrt_eps {rep.constants['C_sqrt_eps_max']:.4f}, "
            f"ratio_lognn window [{min(window):.3f}, {max(window):.3f}], "
            f"D_{args.n_max} {rep.records[-1]['D_n']:.3e}"
        )

        fab = run(
            ExperimentConfig(
                kind="faber-suite",
                domain=domain,
                n_min=1,
                n_max=min(args.n_max, 30),
                out_dir=args.out,
                cache=not args.no_cache,
                jobs=args.jobs,
            )
        )
        worst = max(r["faber_norm"] for r in fab.records)
        print(f"  max faber norm {worst:.6f} (bound 2)")

    spread = max(c_by_domain.values()) / min(c_by_domain.values())
    print(f"cross-domain C stability: {spread:.3f} (want <= 2)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
