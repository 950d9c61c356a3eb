"""Command-line entry point.

    convexortho <subcommand> [--config PATH] [--domain LIT] [--out DIR]
                             [--n-max K] [--jobs J] [--no-cache]

Subcommands select the experiment kind (or a utility view):

    validate    parse and echo the canonical config with its hash
    map         solve the conformal maps, print capacity
    orthopoly   lambda_n, sup norms, leading products
    zeros       discrepancy-sweep pipeline, zero-location summary
    sweep       discrepancy-sweep pipeline, full CSV
    rates       sweep plus D/sqrt(eps) and D/sqrt(log n/n) ratio columns
    sharpness   disk-plus-needle capacity and discrepancy table over deltas
    faber       Faber norm suite
    chebyshev   Chebyshev norm suite
    fit         recompute fitted constants from a report JSON

Exit codes: 0 success, 2 config error, 3 numerical failure (stage named on
stderr).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .conformal import exterior_map, interior_map
from .experiments import (
    ExperimentConfig,
    ExperimentFailure,
    InsufficientData,
    fit_constants,
    parse_domain,
    run,
)

_KIND_FOR = {
    "orthopoly": "orthopoly",
    "zeros": "discrepancy-sweep",
    "sweep": "discrepancy-sweep",
    "rates": "rate-check",
    "sharpness": "sharpness",
    "faber": "faber-suite",
    "chebyshev": "chebyshev-suite",
}


def _build_config(args, kind: str | None) -> ExperimentConfig:
    if args.config:
        data = json.loads(Path(args.config).read_text())
        if kind is not None:
            data["kind"] = kind
        cfg = ExperimentConfig.from_dict(data)
    else:
        cfg = ExperimentConfig(
            kind=kind or "orthopoly",
            domain=args.domain,
        )
    if args.out is not None:
        cfg.out_dir = args.out
    if args.n_max is not None:
        cfg.n_max = args.n_max
        cfg.n_min = min(cfg.n_min, cfg.n_max)
    if args.jobs is not None:
        cfg.jobs = args.jobs
    if args.no_cache:
        cfg.cache = False
    # re-validate after overrides
    return ExperimentConfig.from_dict(cfg.to_dict())


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="convexortho", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--domain", default="square", help="domain literal")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--n-max", dest="n_max", type=int, default=None)
        p.add_argument("--jobs", type=int, default=None)
        p.add_argument("--no-cache", action="store_true")

    for name in ("validate", "map", *_KIND_FOR):
        add_common(sub.add_parser(name))
    fit_p = sub.add_parser("fit")
    fit_p.add_argument("report", help="report JSON produced by a run")

    args = parser.parse_args(argv)

    if args.command == "fit":
        try:
            data = json.loads(Path(args.report).read_text())
            records = data["records"]
        except Exception as exc:
            print(f"config error: cannot read report: {exc}", file=sys.stderr)
            return 2
        try:
            print(json.dumps(fit_constants(records), indent=2, sort_keys=True))
        except InsufficientData as exc:
            print(f"stage 'fit' failed: {exc}", file=sys.stderr)
            return 3
        return 0

    try:
        cfg = _build_config(args, _KIND_FOR.get(args.command))
    except Exception as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.command == "validate":
        print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
        print(f"hash: {cfg.config_hash()}")
        return 0

    if args.command == "map":
        try:
            domain = parse_domain(cfg.domain)
            emap = exterior_map(domain)
        except Exception as exc:
            print(f"stage 'maps' failed: {exc}", file=sys.stderr)
            return 3
        print(f"domain: {cfg.domain}")
        print(f"capacity: {emap.capacity!r}")
        try:
            print(f"interior map: {type(interior_map(domain)).__name__}")
        except NotImplementedError:
            print("interior map: not provided for this domain")
        return 0

    try:
        report = run(cfg)
    except ExperimentFailure as exc:
        print(f"stage '{exc.stage}' failed: {exc.cause!r}", file=sys.stderr)
        return 3

    if args.command == "zeros":
        for rec in report.records:
            print(
                f"n={rec['n']:3d}  interior={rec['zeros_interior']:3d}  "
                f"boundary={rec['zeros_boundary']:3d}  "
                f"exterior={rec['zeros_exterior']:3d}  "
                f"backward_error={rec['backward_error']:.3e}"
            )
    print(f"wrote {report.csv_path}")
    print(f"wrote {report.json_path}")
    if report.constants:
        print(json.dumps(report.constants, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
