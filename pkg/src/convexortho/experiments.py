"""Reproducible experiment pipelines: domain -> maps -> orthonormal basis ->
zeros -> boundary measures -> report.

A config is a flat JSON object:

    {
      "kind": "discrepancy-sweep",
      "domain": "ngon:4",
      "weight": {"kind": "unit"},
      "n_min": 2,
      "n_max": 40,
      "grid_base": 2048,
      "quadrature_margin": 0,
      "deltas": [0.1, 0.2, 0.5],
      "out_dir": "out",
      "cache": true,
      "jobs": 1,
      "seed": 0
    }

kind is one of: orthopoly, discrepancy-sweep, rate-check, sharpness,
faber-suite, chebyshev-suite.  domain literals: "disk", "disk:R", "square",
"ellipse", "ellipse:A:B", "ngon:K", "pentagon", "hexagon".  Every run writes
one CSV (plot-ready rows, no timing data, floats via repr so reruns are
bit-identical) and one JSON summary (adds fitted constants, versions, wall
time).  Expensive stages (exterior map solve, orthonormalization) are cached
under out_dir/cache keyed by a hash of the inputs that determine them.
"""

from __future__ import annotations

import hashlib
import json
import math
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .classical import LawsonStall, chebyshev, faber, sharpness_check, sharpness_instance
from .conformal import (
    ExteriorMapBase,
    InteriorMapBase,
    exterior_map,
    interior_map,
    map_from_dict,
)
from .geometry import ConvexDomain, Disk, Ellipse, Polygon, regular_polygon
from .measures import (
    balayage_measure,
    common_grid,
    discrepancy,
    equilibrium_boundary_measure,
    potential_gap,
)
from .orthopoly import (
    N_MAX_DEFAULT,
    OrthoSequence,
    Weight,
    build_engine,
    leading_product,
    orthonormalize,
    sup_norm,
)
from .zeros import zeros_of

__all__ = [
    "KINDS",
    "ExperimentConfig",
    "ExperimentReport",
    "ExperimentFailure",
    "InsufficientData",
    "parse_domain",
    "run",
    "fit_constants",
]

KINDS = (
    "orthopoly",
    "discrepancy-sweep",
    "rate-check",
    "sharpness",
    "faber-suite",
    "chebyshev-suite",
)


class InsufficientData(ValueError):
    pass


class ExperimentFailure(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause!r}")


def parse_domain(literal: str) -> ConvexDomain:
    parts = literal.split(":")
    head = parts[0]
    if head == "disk":
        r = float(parts[1]) if len(parts) > 1 else 1.0
        return Disk(0.0, r)
    if head == "square":
        return Polygon((1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j))
    if head == "ellipse":
        a = float(parts[1]) if len(parts) > 1 else 2.0
        b = float(parts[2]) if len(parts) > 2 else 1.0
        return Ellipse(0.0, a, b, 0.0)
    if head == "ngon":
        return regular_polygon(int(parts[1]))
    if head == "pentagon":
        return regular_polygon(5)
    if head == "hexagon":
        return regular_polygon(6)
    raise ValueError(f"unknown domain literal {literal!r}")


@dataclass
class ExperimentConfig:
    kind: str
    domain: str
    weight: Weight = field(default_factory=lambda: Weight("unit"))
    n_min: int = 1
    n_max: int = 20
    grid_base: int = 2048
    quadrature_margin: int = 0
    deltas: tuple[float, ...] = (0.1, 0.2, 0.5)
    out_dir: str = "out"
    cache: bool = True
    jobs: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not 1 <= self.n_min <= self.n_max:
            raise ValueError("need 1 <= n_min <= n_max")
        if self.n_max > N_MAX_DEFAULT:
            raise ValueError(f"n_max exceeds engine limit {N_MAX_DEFAULT}")
        if not self.deltas or any(not 0 < d <= 1 for d in self.deltas):
            raise ValueError("deltas must be nonempty, each in (0, 1]")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        if self.grid_base < 128:
            raise ValueError("grid_base must be >= 128")
        parse_domain(self.domain)
        self.deltas = tuple(float(d) for d in self.deltas)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "domain": self.domain,
            "weight": self.weight.to_dict(),
            "n_min": self.n_min,
            "n_max": self.n_max,
            "grid_base": self.grid_base,
            "quadrature_margin": self.quadrature_margin,
            "deltas": list(self.deltas),
            "out_dir": self.out_dir,
            "cache": self.cache,
            "jobs": self.jobs,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        weight = data.get("weight", {"kind": "unit"})
        if isinstance(weight, dict):
            weight = Weight.from_dict(weight)
        data["weight"] = weight
        if "deltas" in data:
            data["deltas"] = tuple(data["deltas"])
        return cls(**data)

    def config_hash(self) -> str:
        # out_dir/cache/jobs do not alter results, so they stay out of the key
        payload = self.to_dict()
        for transient in ("out_dir", "cache", "jobs"):
            payload.pop(transient)
        blob = json.dumps(payload, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    config_hash: str
    records: list[dict]
    constants: dict
    versions: dict
    wall_time: float
    csv_path: str
    json_path: str


# ---------------------------------------------------------------------------
# caching

def _cache_file(cfg: ExperimentConfig, tag: str, key_parts: dict) -> Path:
    blob = json.dumps({"tag": tag, **key_parts}, sort_keys=True)
    digest = hashlib.sha256(blob.encode()).hexdigest()
    return Path(cfg.out_dir) / "cache" / f"{tag}-{digest[:24]}.json"


def _get_maps(cfg: ExperimentConfig, domain: ConvexDomain, interior: bool):
    # Interior maps exist for disks and polygons only; the sweep kinds are
    # the sole consumers, so other kinds must not ask for one.
    path = _cache_file(cfg, "maps", {"domain": cfg.domain, "interior": interior})
    if cfg.cache and path.exists():
        data = json.loads(path.read_text())
        emap = map_from_dict(data["exterior"])
        imap = map_from_dict(data["interior"]) if interior else None
        return emap, imap
    emap = exterior_map(domain)
    imap = interior_map(domain) if interior else None
    if cfg.cache:
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {"exterior": emap.to_dict()}
        if interior:
            payload["interior"] = imap.to_dict()
        path.write_text(json.dumps(payload))
    return emap, imap


def _get_sequence(cfg: ExperimentConfig, domain: ConvexDomain) -> OrthoSequence:
    key = {
        "domain": cfg.domain,
        "weight": cfg.weight.to_dict(),
        "n_max": cfg.n_max,
        "margin": cfg.quadrature_margin,
    }
    path = _cache_file(cfg, "orthopoly", key)
    if cfg.cache and path.exists():
        return OrthoSequence.from_dict(json.loads(path.read_text()))
    engine = build_engine(
        domain, cfg.weight, n_max=cfg.n_max, degree_margin=cfg.quadrature_margin
    )
    seq = orthonormalize(engine, cfg.n_max)
    if cfg.cache:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(seq.to_dict()))
    return seq


# ---------------------------------------------------------------------------
# per-record builders

def _orthopoly_record(seq: OrthoSequence, emap: ExteriorMapBase, n: int) -> dict:
    return {
        "n": n,
        "lambda_n": float(seq.lam[n]),
        "norm_qn": float(sup_norm(seq, n)),
        "lead_product": float(leading_product(seq, n, emap.capacity)),
    }


def _sweep_record(
    seq: OrthoSequence,
    emap: ExteriorMapBase,
    imap: InteriorMapBase,
    mu,
    n: int,
) -> dict:
    rec = _orthopoly_record(seq, emap, n)
    zs = zeros_of(seq, n)
    counts = {"interior": 0, "boundary": 0, "exterior": 0}
    for flag in zs.flags:
        counts[flag] += 1
    tau = balayage_measure(imap, zs)
    a, b = common_grid(mu, tau)
    rec["D_n"] = float(discrepancy(a, b).D)
    rec["eps_n"] = float(potential_gap(seq, n, emap).epsilon)
    rec["zeros_interior"] = counts["interior"]
    rec["zeros_boundary"] = counts["boundary"]
    rec["zeros_exterior"] = counts["exterior"]
    rec["backward_error"] = float(zs.backward_error)
    return rec


def _rate_record(seq, emap, imap, mu, n: int) -> dict:
    rec = _sweep_record(seq, emap, imap, mu, n)
    rec["ratio_sqrt_eps"] = rec["D_n"] / math.sqrt(max(rec["eps_n"], 1e-12))
    x = math.sqrt(math.log(n) / n) if n >= 2 else float("nan")
    rec["ratio_lognn"] = rec["D_n"] / x if n >= 2 else float("nan")
    return rec


def _sharpness_record(delta: float) -> dict:
    inst = sharpness_instance(delta)
    chk = sharpness_check(inst)
    return {
        "delta": float(delta),
        "capacity": float(inst.capacity),
        "interval_mass": float(inst.interval_mass),
        "D": float(chk["D"]),
        "eps": float(chk["eps"]),
        "ratio": float(chk["ratio"]),
    }


def _faber_record(fs, norms, dnorms, n: int) -> dict:
    return {
        "n": n,
        "faber_norm": float(norms[n]),
        "deriv_norm": float(dnorms[n]),
        "deriv_ratio": float(dnorms[n] / (n + 1) ** 2),
        "lead_times_capn": float(abs(fs.coeffs[n, n]) * fs.capacity**n),
    }


def _chebyshev_record(domain: ConvexDomain, emap: ExteriorMapBase, n: int) -> dict:
    try:
        r = chebyshev(domain, emap, n)
    except LawsonStall as exc:
        r = exc.best
    return {
        "n": n,
        "cheb_norm": float(r.norm),
        "norm_over_capn": float(r.norm / emap.capacity**n),
        "ratio_to_bound": float(r.norm / (2 * emap.capacity**n)),
        "converged": int(r.converged),
        "iterations": int(r.iterations),
        "spread": float(r.spread),
    }


_CSV_COLUMNS = {
    "orthopoly": ["n", "lambda_n", "norm_qn", "lead_product"],
    "discrepancy-sweep": [
        "n", "lambda_n", "norm_qn", "lead_product", "D_n", "eps_n",
        "zeros_interior", "zeros_boundary", "zeros_exterior", "backward_error",
    ],
    "rate-check": [
        "n", "lambda_n", "norm_qn", "lead_product", "D_n", "eps_n",
        "zeros_interior", "zeros_boundary", "zeros_exterior", "backward_error",
        "ratio_lognn", "ratio_sqrt_eps",
    ],
    "sharpness": ["delta", "capacity", "interval_mass", "D", "eps", "ratio"],
    "faber-suite": ["n", "faber_norm", "deriv_norm", "deriv_ratio", "lead_times_capn"],
    "chebyshev-suite": [
        "n", "cheb_norm", "norm_over_capn", "ratio_to_bound", "converged",
        "iterations", "spread",
    ],
}


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, kind: str, records: list[dict]) -> None:
    cols = _CSV_COLUMNS[kind]
    lines = [",".join(cols)]
    for rec in records:
        lines.append(",".join(_format_cell(rec[c]) for c in cols))
    path.write_text("\n".join(lines) + "\n")


def _map_ordered(fn, items, jobs: int) -> list:
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def run(config: ExperimentConfig) -> ExperimentReport:
    """Execute the configured pipeline, write CSV + JSON, return the report.

    Module errors propagate as ExperimentFailure with the stage named.
    Records are assembled in degree order regardless of worker scheduling,
    and every reduction underneath is deterministic, so reruns produce
    byte-identical CSV files.
    """
    t0 = time.perf_counter()
    try:
        domain = parse_domain(config.domain)
    except Exception as exc:
        raise ExperimentFailure("domain", exc)

    degrees = list(range(config.n_min, config.n_max + 1))
    constants: dict = {}

    if config.kind == "sharpness":
        try:
            records = _map_ordered(_sharpness_record, config.deltas, config.jobs)
        except Exception as exc:
            raise ExperimentFailure("sharpness", exc)
    else:
        try:
            needs_interior = config.kind in ("discrepancy-sweep", "rate-check")
            emap, imap = _get_maps(config, domain, needs_interior)
        except Exception as exc:
            raise ExperimentFailure("maps", exc)

        if config.kind == "faber-suite":
            try:
                fs = faber(emap, config.n_max + 1)
                norms = fs.norms()
                dnorms = fs.derivative_norms()
                records = _map_ordered(
                    lambda n: _faber_record(fs, norms, dnorms, n), degrees, config.jobs
                )
            except Exception as exc:
                raise ExperimentFailure("faber", exc)
        elif config.kind == "chebyshev-suite":
            try:
                records = _map_ordered(
                    lambda n: _chebyshev_record(domain, emap, n), degrees, config.jobs
                )
            except Exception as exc:
                raise ExperimentFailure("chebyshev", exc)
        else:
            try:
                seq = _get_sequence(config, domain)
            except Exception as exc:
                raise ExperimentFailure("orthopoly", exc)
            constants["gram_residual"] = float(seq.gram_residual)
            if config.kind == "orthopoly":
                try:
                    records = _map_ordered(
                        lambda n: _orthopoly_record(seq, emap, n), degrees, config.jobs
                    )
                except Exception as exc:
                    raise ExperimentFailure("orthopoly", exc)
            else:
                try:
                    mu = equilibrium_boundary_measure(emap)
                    builder = (
                        _rate_record
                        if config.kind == "rate-check"
                        else _sweep_record
                    )
                    records = _map_ordered(
                        lambda n: builder(seq, emap, imap, mu, n),
                        degrees,
                        config.jobs,
                    )
                except Exception as exc:
                    raise ExperimentFailure("measures", exc)

    if config.kind not in ("sharpness",):
        try:
            constants.update(fit_constants(records))
        except InsufficientData:
            constants["fit"] = "skipped: fewer than 8 degree points"

    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    slug = config.domain.replace(":", "_")
    stem = f"{config.kind}-{slug}"
    csv_path = out / f"{stem}.csv"
    json_path = out / f"{stem}.json"
    try:
        _write_csv(csv_path, config.kind, records)
        wall = time.perf_counter() - t0
        payload = {
            "config": config.to_dict(),
            "config_hash": config.config_hash(),
            "records": records,
            "constants": constants,
            "versions": {
                "convexortho": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
            "wall_time": wall,
        }
        json_path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    except Exception as exc:
        raise ExperimentFailure("report", exc)

    return ExperimentReport(
        config=config,
        config_hash=config.config_hash(),
        records=records,
        constants=constants,
        versions=payload["versions"],
        wall_time=wall,
        csv_path=str(csv_path),
        json_path=str(json_path),
    )


def fit_constants(records) -> dict:
    """Fitted constants from per-degree records (>= 8 of them).

    Through-origin least squares of D_n on sqrt(log n / n) for the arc
    discrepancy rate, the same against sqrt(max(eps, 1e-12)) plus the
    dominating max ratio, a log-log slope for the norm growth, and the
    minimum of n^2 lambda_n cap^n.  Reports residuals; asserts nothing.
    """
    if hasattr(records, "records"):
        records = records.records
    recs = [r for r in records if "n" in r]
    if len(recs) < 8:
        raise InsufficientData(f"need >= 8 degree points, got {len(recs)}")
    n = np.array([r["n"] for r in recs], dtype=float)
    out: dict = {}

    def origin_fit(x, y):
        denom = float(np.sum(x * x))
        c = float(np.sum(x * y)) / denom if denom > 0 else 0.0
        resid = float(np.linalg.norm(y - c * x))
        scale = float(np.linalg.norm(y))
        return c, resid / scale if scale > 0 else 0.0

    if all("D_n" in r for r in recs):
        d = np.array([r["D_n"] for r in recs])
        x1 = np.sqrt(np.log(np.maximum(n, 1.0)) / n)
        c, resid = origin_fit(x1, d)
        out["c_lognn"] = c
        out["resid_lognn"] = resid
        if all("eps_n" in r for r in recs):
            x2 = np.sqrt(np.maximum([r["eps_n"] for r in recs], 1e-12))
            c2, resid2 = origin_fit(x2, d)
            out["c_sqrt_eps"] = c2
            out["resid_sqrt_eps"] = resid2
            out["C_sqrt_eps_max"] = float(np.max(d / x2))

    if all("norm_qn" in r for r in recs):
        mask = n >= 2
        logn = np.log(n[mask])
        logq = np.log([r["norm_qn"] for r in recs])[mask]
        design = np.column_stack((logn, np.ones_like(logn)))
        sol, *_ = np.linalg.lstsq(design, logq, rcond=None)
        fitted = design @ sol
        out["c2_norm_exponent"] = float(sol[0])
        out["c1_norm_prefactor"] = float(math.exp(sol[1]))
        scale = float(np.linalg.norm(logq)) or 1.0
        out["resid_norm_fit"] = float(np.linalg.norm(logq - fitted)) / scale

    if all("lead_product" in r for r in recs):
        lead = np.array([r["lead_product"] for r in recs])
        out["c3_min_n2_lead"] = float(np.min(n**2 * lead))

    return out
