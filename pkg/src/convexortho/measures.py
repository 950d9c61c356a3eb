"""Boundary measures, arc discrepancy, and logarithmic-potential gaps.

The objects here compare the equilibrium measure with the swept-out
(balayage) zero-counting measure tau_n.  Both are represented by their
cumulative mass along the boundary arc-length parameter, plus point atoms
for boundary zeros, so arc masses are differences of cumulative values and
the discrepancy over all subarcs reduces to a max-minus-min scan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .conformal import ExteriorMapBase, InteriorMapBase, poisson_arc_measure
from .geometry import BoundaryArc, ConvexDomain
from .orthopoly import OrthoSequence, eval_basis
from .zeros import ZeroSet, zero_counting_measure

__all__ = [
    "BoundaryMeasure",
    "DiscrepancyReport",
    "PotentialGapReport",
    "GridMismatch",
    "SingularEvaluation",
    "ExteriorZero",
    "boundary_grid",
    "equilibrium_boundary_measure",
    "balayage_measure",
    "on_grid",
    "common_grid",
    "discrepancy",
    "potential_gap",
    "potential_of_measure",
]

INFLATION = 1e-6
EPS_FLOOR = 1e-12


class GridMismatch(ValueError):
    """Two measures must share a grid before their difference is scanned."""


class SingularEvaluation(ValueError):
    """Potential evaluated on the carrier of the measure."""


class ExteriorZero(RuntimeError):
    """A zero was flagged exterior; balayage is undefined for it."""


@dataclass
class BoundaryMeasure:
    """Measure on the boundary: continuous cumulative on a grid, plus atoms.

    ``cumulative[i]`` is the continuous mass of [grid[0], grid[i]];
    ``atoms`` are (s, mass) point masses.  ``cumulative_fn``, when present,
    evaluates the continuous cumulative exactly at any parameter (grids can
    then be refined without interpolation loss).
    """

    domain: ConvexDomain
    grid: np.ndarray
    cumulative: np.ndarray
    atoms: tuple[tuple[float, float], ...]
    total: float
    cumulative_fn: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if not np.all(np.diff(self.grid) > 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(np.diff(self.cumulative) < -1e-12 * max(abs(self.total), 1.0)):
            raise ValueError("cumulative must be non-decreasing")

    def _continuous_at(self, s):
        s = np.asarray(s, dtype=float)
        per = self.domain.perimeter
        if self.cumulative_fn is not None:
            base = self.cumulative_fn(np.asarray(self.grid[0], dtype=float))
            k = np.floor((s - self.grid[0]) / per)
            lifted = self.cumulative_fn(s - k * per) - base
            return lifted + k * self.cumulative[-1]
        k = np.floor((s - self.grid[0]) / per)
        folded = s - k * per
        return np.interp(folded, self.grid, self.cumulative) + k * self.cumulative[-1]

    def arc_mass(self, arc: BoundaryArc) -> float:
        """Mass of a closed subarc (continuous part plus atoms on it)."""
        s0, s1 = arc.endpoints_unwrapped()
        mass = float(self._continuous_at(s1) - self._continuous_at(s0))
        for t, m in self.atoms:
            if arc.contains_param(t):
                mass += m
        return mass


@dataclass
class DiscrepancyReport:
    """sup over subarcs of |sigma(J)| for sigma = a - b, with the arc
    realizing it (from the location of the running minimum to the maximum)."""

    D: float
    arc_start: float
    arc_end: float
    grid_size: int
    atom_note: str


@dataclass
class PotentialGapReport:
    """max(0, sup of U(mu - tau_n)) over the inflated boundary curve."""

    epsilon: float
    argmax_point: complex
    grid_size: int
    log_phi: float
    log_qn: float
    log_lambda: float
    n_log_cap: float


def boundary_grid(
    domain: ConvexDomain,
    maps: tuple = (),
    zeros: ZeroSet | None = None,
    base: int = 2048,
) -> np.ndarray:
    """Arc-length grid: uniform in s, uniform in each map's angle variable,
    plus a Cauchy-spaced cluster around each zero's boundary projection
    (the balayage density varies on the scale of the zero's distance)."""
    per = domain.perimeter
    parts = [np.linspace(0.0, per, base + 1)]
    theta = 2 * math.pi * np.arange(base) / base
    for m in maps:
        angle_to_s = getattr(m, "s_of_theta", None) or getattr(m, "s_of_eta")
        s = np.sort(np.mod(angle_to_s(theta), per))
        parts.append(s)
    if zeros is not None:
        for z, flag in zip(zeros.zeros, zeros.flags):
            if flag == "exterior":
                continue
            d = domain.dist_to_boundary(complex(z))
            if d <= 0:
                continue
            s_star = domain.boundary_param(complex(z))
            offs = d * np.tan(np.linspace(-1.45, 1.45, 32))
            parts.append(np.mod(s_star + offs, per))
    s = np.unique(np.concatenate(parts))
    keep = np.concatenate(([True], np.diff(s) > 1e-13 * per))
    s = s[keep]
    if s[0] > 0.0:
        s = np.concatenate(([0.0], s))
    if s[-1] < per * (1 - 1e-15):
        s = np.concatenate((s, [per]))
    else:
        s[-1] = per
    return s


def equilibrium_boundary_measure(
    emap: ExteriorMapBase, grid: np.ndarray | None = None
) -> BoundaryMeasure:
    """Equilibrium measure: arc mass = image angular length / 2pi."""
    domain = emap.domain
    if grid is None:
        grid = boundary_grid(domain, maps=(emap,))
    theta0 = float(emap.theta_of_s(0.0))

    def cum(s):
        return (emap.theta_of_s(s) - theta0) / (2 * math.pi)

    cumulative = np.asarray(cum(grid), dtype=float)
    return BoundaryMeasure(
        domain=domain,
        grid=grid,
        cumulative=cumulative,
        atoms=(),
        total=float(cumulative[-1]),
        cumulative_fn=cum,
    )


def balayage_measure(
    imap: InteriorMapBase,
    zs: ZeroSet,
    grid: np.ndarray | None = None,
) -> BoundaryMeasure:
    """Sweep the zero-counting measure onto the boundary.

    Interior zeros contribute their harmonic measure through the disk
    Poisson closed form; boundary zeros keep their mass as atoms (the
    boundary convention assigns them arc membership directly).
    """
    if any(f == "exterior" for f in zs.flags):
        bad = [complex(z) for z, f in zip(zs.zeros, zs.flags) if f == "exterior"]
        raise ExteriorZero(f"{len(bad)} zero(s) outside the closure: {bad[:3]}")
    domain = imap.domain
    if grid is None:
        grid = boundary_grid(domain, maps=(imap,), zeros=zs)

    nu = zero_counting_measure(zs)
    flag_by_zero = {complex(z): f for z, f in zip(zs.zeros, zs.flags)}
    interior: list[tuple[complex, float]] = []
    atom_mass: dict[float, float] = {}
    for z, mass in nu.items():
        if flag_by_zero[z] == "boundary":
            s_at = float(domain.boundary_param(z))
            atom_mass[s_at] = atom_mass.get(s_at, 0.0) + mass
        else:
            interior.append((complex(imap.eval(z)), mass))

    eta0 = float(imap.eta_of_s(0.0))
    us = np.array([u for u, _ in interior])
    ms = np.array([m for _, m in interior])

    def cum(s):
        eta = np.asarray(imap.eta_of_s(s), dtype=float)
        if us.size == 0:
            return np.zeros(eta.shape)
        vals = [m * poisson_arc_measure(u, eta0, eta) for u, m in zip(us, ms)]
        return np.sum(vals, axis=0)

    atoms = tuple(sorted(atom_mass.items()))
    if atoms:
        grid = np.unique(np.concatenate((grid, [t for t, _ in atoms])))
    cumulative = np.asarray(cum(grid), dtype=float)
    total = float(cumulative[-1]) + sum(m for _, m in atoms)
    return BoundaryMeasure(
        domain=domain,
        grid=grid,
        cumulative=cumulative,
        atoms=atoms,
        total=total,
        cumulative_fn=cum,
    )


def on_grid(measure: BoundaryMeasure, grid: np.ndarray) -> BoundaryMeasure:
    """Re-express the measure on a (finer) grid covering the same period."""
    grid = np.unique(np.concatenate((grid, [t for t, _ in measure.atoms])))
    cumulative = measure._continuous_at(grid) - measure._continuous_at(grid[0])
    return BoundaryMeasure(
        domain=measure.domain,
        grid=grid,
        cumulative=np.asarray(cumulative, dtype=float),
        atoms=measure.atoms,
        total=measure.total,
        cumulative_fn=measure.cumulative_fn,
    )


def common_grid(a: BoundaryMeasure, b: BoundaryMeasure):
    sites = [t for t, _ in a.atoms] + [t for t, _ in b.atoms]
    grid = np.unique(np.concatenate((a.grid, b.grid, np.asarray(sites))))
    return on_grid(a, grid), on_grid(b, grid)


def discrepancy(a: BoundaryMeasure, b: BoundaryMeasure) -> DiscrepancyReport:
    """D[a - b]: the difference cumulative S is evaluated at every grid
    point and on both sides of every atom; every subarc mass is a difference
    of two such values, so D = max S - min S."""
    if a.grid.shape != b.grid.shape or not np.array_equal(a.grid, b.grid):
        raise GridMismatch("measures live on different grids; refine first")
    s_cont = a.cumulative - b.cumulative
    jumps: dict[float, float] = {}
    for t, m in a.atoms:
        jumps[t] = jumps.get(t, 0.0) + m
    for t, m in b.atoms:
        jumps[t] = jumps.get(t, 0.0) - m

    grid = a.grid
    jump_at = np.zeros(grid.size)
    for t, m in jumps.items():
        idx = np.searchsorted(grid, t)
        if idx >= grid.size or abs(grid[idx] - t) > 1e-12 * a.domain.perimeter:
            raise GridMismatch(f"atom site {t} missing from the common grid")
        jump_at[idx] = m
    accumulated = np.cumsum(jump_at)
    left = s_cont + accumulated - jump_at  # limit from below at each point
    right = s_cont + accumulated
    values = np.concatenate((left, right))
    locs = np.concatenate((grid, grid))
    hi = int(np.argmax(values))
    lo = int(np.argmin(values))
    d = float(values[hi] - values[lo])
    s_lo, s_hi = float(locs[lo]), float(locs[hi])
    note = f"{len(jumps)} atom site(s) evaluated two-sided"
    return DiscrepancyReport(
        D=d,
        arc_start=min(s_lo, s_hi),
        arc_end=max(s_lo, s_hi),
        grid_size=int(grid.size),
        atom_note=note,
    )


def potential_gap(
    seq: OrthoSequence,
    n: int,
    emap: ExteriorMapBase,
    points: int = 4096,
) -> PotentialGapReport:
    """epsilon(tau_n) = max(0, sup_Omega U(mu - tau_n)).

    U(mu - tau_n, z) = (1/n) log(|Q_n(z)| / (lambda_n cap^n |Phi(z)|^n)) is
    harmonic in the exterior and vanishes at infinity, so the sup lives on
    the boundary; it is sampled on the slightly inflated curve
    Psi((1+1e-6) e^(i theta)), where |Phi| is known exactly by construction.
    """
    points = max(points, 64 * n)
    theta = 2 * math.pi * np.arange(points) / points
    w = (1.0 + INFLATION) * np.exp(1j * theta)
    z = np.array([emap.eval_inverse(wj) for wj in w])
    log_qn = np.log(np.abs(eval_basis(seq, n, z)[n]))
    log_phi = math.log1p(INFLATION)
    log_cap = math.log(emap.capacity)
    u = (log_qn - seq.lam_log[n] - n * log_cap - n * log_phi) / n
    best = int(np.argmax(u))
    eps = max(0.0, float(u[best]))
    return PotentialGapReport(
        epsilon=eps,
        argmax_point=complex(z[best]),
        grid_size=points,
        log_phi=log_phi,
        log_qn=float(log_qn[best]),
        log_lambda=float(seq.lam_log[n]),
        n_log_cap=n * log_cap,
    )


def potential_of_measure(measure: BoundaryMeasure, z: complex) -> float:
    """U(measure, z) = -integral log|z - zeta| d(measure), by the midpoint
    rule on the grid plus atom terms.  Oracle-grade only; raises if z sits
    on the carrier."""
    domain = measure.domain
    tol = 1e-12 * domain.diameter
    z = complex(z)
    mid = 0.5 * (measure.grid[:-1] + measure.grid[1:])
    masses = np.diff(measure.cumulative)
    live = masses > 0
    if live.any() and domain.contains(z, boundary_tol=1e-9 * domain.diameter) == "boundary":
        raise SingularEvaluation("potential evaluated on the boundary carrier")
    zeta = domain.boundary_points(mid)
    dist = np.abs(z - zeta)
    if np.any(dist[live] < tol):
        raise SingularEvaluation("potential evaluated on the boundary carrier")
    u = -float(np.sum(masses[live] * np.log(dist[live])))
    for t, m in measure.atoms:
        site = domain.boundary_point(t).z
        d = abs(z - site)
        if d < tol:
            raise SingularEvaluation("potential evaluated at an atom site")
        u -= m * math.log(d)
    return u
