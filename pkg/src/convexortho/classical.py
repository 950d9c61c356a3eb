"""Faber and Chebyshev polynomial families, and the disk-plus-needle
sharpness construction.

Faber polynomials come from the recurrence driven by the exterior map's
Laurent coefficients; Chebyshev polynomials from Lawson's iteratively
reweighted least squares on a boundary grid.  The sharpness instance builds
the equilibrium measure of a unit disk with a radial needle [1, 1+delta]
through the Joukowski change of variables, which flattens the whole set
onto a real interval with the classical arcsine measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .conformal import ExteriorMapBase, exterior_map, laurent_coefficients
from .geometry import ConvexDomain, Disk
from .measures import (
    BoundaryMeasure,
    common_grid,
    discrepancy,
    equilibrium_boundary_measure,
)
from .orthopoly import _boundary_grid

__all__ = [
    "FaberSequence",
    "SharpnessInstance",
    "ChebyshevResult",
    "LawsonStall",
    "faber",
    "faber_derivative_norms",
    "chebyshev",
    "sharpness_instance",
    "sharpness_check",
]


class LawsonStall(RuntimeError):
    """Lawson iteration hit its cap before the weighted spread closed.

    ``best`` carries the best iterate found so far.
    """

    def __init__(self, message: str, best: "ChebyshevResult"):
        self.best = best
        super().__init__(message)


@dataclass
class FaberSequence:
    """Rows of monomial coefficients (ascending degree) of F_0..F_N.

    F_n is normalized so its leading coefficient is cap^(-n): F_n is the
    polynomial part of the n-th power of the exterior map.
    """

    N: int
    coeffs: np.ndarray
    capacity: float
    domain: ConvexDomain

    def eval(self, n: int, z):
        if n > self.N:
            raise ValueError(f"degree {n} exceeds N={self.N}")
        zz = np.asarray(z, dtype=complex)
        vals = np.polyval(self.coeffs[n, : n + 1][::-1], zz)
        return complex(vals) if zz.ndim == 0 else vals

    def _grid_values(self, rows: np.ndarray) -> np.ndarray:
        s = _boundary_grid(self.domain, self.N + 1)
        z = self.domain.boundary_points(s)
        powers = np.vander(z, rows.shape[1], increasing=True).T
        return np.abs(rows @ powers)

    def norms(self) -> np.ndarray:
        """sup of |F_n| over the boundary for n = 0..N."""
        return self._grid_values(self.coeffs).max(axis=1)

    def derivative_norms(self) -> np.ndarray:
        """sup of |F'_(n+1)| for n = 0..N-1."""
        k = np.arange(self.coeffs.shape[1])
        deriv = (self.coeffs * k)[1:, 1:]
        return self._grid_values(deriv).max(axis=1)


def faber(emap: ExteriorMapBase, N: int) -> FaberSequence:
    """F_0..F_N from the Laurent-coefficient recurrence

        cap * F_m = (z - b0) F_(m-1) - sum_(k=1)^(m-1) b_k F_(m-1-k)
                    - (m-1) b_(m-1),

    obtained by matching powers in F-generating-function times (Psi - z)
    equals Psi'."""
    cap, b = laurent_coefficients(emap, max(N, 1) + 1)
    coeffs = np.zeros((N + 1, N + 1), dtype=complex)
    coeffs[0, 0] = 1.0
    for m in range(1, N + 1):
        row = np.zeros(N + 1, dtype=complex)
        row[1 : m + 1] = coeffs[m - 1, :m]
        row -= b[0] * coeffs[m - 1]
        for k in range(1, m):
            row -= b[k] * coeffs[m - 1 - k]
        row[0] -= (m - 1) * b[m - 1]
        coeffs[m] = row / cap
    return FaberSequence(N=N, coeffs=coeffs, capacity=cap, domain=emap.domain)


def faber_derivative_norms(fs: FaberSequence) -> np.ndarray:
    return fs.derivative_norms()


@dataclass
class ChebyshevResult:
    """Monic minimax candidate: coefficients ascending (top one = 1).

    ``norm`` is the boundary sup of the best iterate on a dense evaluation
    grid (finer than the Lawson grid); ``history`` holds the best sup seen
    up to each iteration, so it is non-increasing; ``spread`` is the final
    certified gap between that sup and the weighted-rms lower bound.
    """

    n: int
    coeffs: np.ndarray
    norm: float
    iterations: int
    history: np.ndarray
    spread: float
    converged: bool

    def eval(self, z):
        zz = np.asarray(z, dtype=complex)
        vals = np.polyval(self.coeffs[::-1], zz)
        return complex(vals) if zz.ndim == 0 else vals


def _dense_sup(domain: ConvexDomain, coeffs: np.ndarray) -> float:
    s = _boundary_grid(domain, max(8, coeffs.size - 1))
    z = domain.boundary_points(s)
    return float(np.max(np.abs(np.polyval(coeffs[::-1], z))))


def chebyshev(
    domain: ConvexDomain,
    emap: ExteriorMapBase | None = None,
    n: int = 1,
    max_iter: int = 2500,
    spread_tol: float = 1e-6,
    grid_size: int | None = None,
) -> ChebyshevResult:
    """Monic sup-norm minimizer of degree n by Lawson iteration: weighted
    least squares in the n lower coefficients, weights multiplied by the
    residual modulus each round.

    Converged when the spread (best sup over the weighted-rms lower bound,
    minus one) drops below spread_tol.  The Lawson grid is uniform in
    arclength with polygon vertices added exactly; clustering extra points
    near the support would hand the weight iteration a ladder of decay
    scales and turn the spread tail into 1/k.  When the spread stalls above
    tolerance the best iterate is still a valid polynomial with a certified
    gap, reported through LawsonStall.
    """
    if n < 1:
        raise ValueError("degree must be >= 1")
    m0 = grid_size if grid_size is not None else max(512, 64 * n)
    s = domain.perimeter * np.arange(m0) / m0
    verts = getattr(domain, "vertices", None)
    if verts is not None:
        s = np.concatenate((s, [domain.vertex_param(k) for k in range(len(verts))]))
    z = domain.boundary_points(np.unique(s))

    scale = float(np.max(np.abs(z)))
    cols = (z[:, None] / scale) ** np.arange(n)
    top = (z / scale) ** n
    w = np.full(z.size, 1.0 / z.size)

    best_sol = None
    best_sup = math.inf
    history = []
    gaps = []
    spread = math.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        root_w = np.sqrt(w)[:, None]
        sol, *_ = np.linalg.lstsq(root_w * cols, -root_w[:, 0] * top, rcond=None)
        err = np.abs(cols @ sol + top)
        sup = float(np.max(err))
        if sup < best_sup:
            best_sup = sup
            best_sol = sol
        history.append(best_sup)
        wrms = math.sqrt(float(np.sum(w * err**2)))
        spread = best_sup / wrms - 1.0
        gaps.append(spread)
        if spread <= spread_tol:
            converged = True
            break
        # stagnation: relative gap improvement below 0.1% across 60 rounds
        if it >= 120 and gaps[-60] - spread < 1e-3 * spread:
            break
        w = w * err
        w /= w.sum()

    coeffs = np.concatenate((best_sol * scale ** (n - np.arange(n)), [1.0]))
    result = ChebyshevResult(
        n=n,
        coeffs=coeffs,
        norm=_dense_sup(domain, coeffs),
        iterations=it,
        history=np.array(history),
        spread=spread,
        converged=converged,
    )
    if emap is not None:
        assert result.norm <= 2.0 * emap.capacity**n * (1.0 + 1e-4)
    if not converged:
        raise LawsonStall(
            f"spread {spread:.3e} above {spread_tol:.1e} after {it} iterations",
            result,
        )
    return result


@dataclass
class SharpnessInstance:
    """Disk with needle V = closed unit disk union [1, 1+delta].

    Everything is carried through x = (z + 1/z)/2, which maps the boundary
    onto the interval [-1, c] with c = 1 + delta^2/(2(1+delta)); the
    equilibrium measure upstairs is the arcsine measure of that interval.
    ``tau`` is the radial projection onto the unit circle: the needle's
    mass lands as an atom at z = 1.
    """

    delta: float
    capacity: float
    interval_mass: float
    tau: BoundaryMeasure
    mu_circle: BoundaryMeasure
    interval_cumulative: Callable[[np.ndarray], np.ndarray]


def _needle_c(delta: float) -> float:
    return 1.0 + delta**2 / (2.0 * (1.0 + delta))


def sharpness_instance(delta: float) -> SharpnessInstance:
    if not 0 < delta <= 1:
        raise ValueError("delta must be in (0, 1]")
    c = _needle_c(delta)
    capacity = 1.0 + delta**2 / (4.0 * (1.0 + delta))
    # arcsine cumulative on [-1, c]: mass of [a, x] is
    # (2/pi) * (asin sqrt((x+1)/(c+1)) - asin sqrt((a+1)/(c+1)))
    half_span = math.sqrt(2.0 / (c + 1.0))
    a0 = math.asin(half_span)
    interval_mass = 1.0 - 2.0 * a0 / math.pi

    def circle_cum(theta):
        theta = np.asarray(theta, dtype=float)
        lift = np.asin(np.sqrt(np.clip((np.cos(theta) + 1) / (c + 1), 0.0, 1.0)))
        upper = (a0 - lift) / math.pi
        lower = (a0 + lift) / math.pi
        return np.where(theta <= math.pi, upper, lower)

    def interval_cum(x):
        x = np.asarray(x, dtype=float)
        im = (x + 1.0 / np.maximum(x, 1.0)) / 2.0
        lift = np.asin(np.sqrt(np.clip((im + 1) / (c + 1), 0.0, 1.0)))
        return 1.0 - 2.0 * (math.pi / 2 - lift) / math.pi - 2.0 * a0 / math.pi

    disk = Disk(0.0, 1.0)
    grid = np.linspace(0.0, disk.perimeter, 4097)
    circle_part = np.asarray(circle_cum(grid), dtype=float)
    tau = BoundaryMeasure(
        domain=disk,
        grid=grid,
        cumulative=circle_part,
        atoms=((0.0, interval_mass),),
        total=float(circle_part[-1]) + interval_mass,
        cumulative_fn=circle_cum,
    )
    mu_circle = BoundaryMeasure(
        domain=disk,
        grid=grid,
        cumulative=circle_part,
        atoms=(),
        total=float(circle_part[-1]),
        cumulative_fn=circle_cum,
    )
    return SharpnessInstance(
        delta=delta,
        capacity=capacity,
        interval_mass=interval_mass,
        tau=tau,
        mu_circle=mu_circle,
        interval_cumulative=interval_cum,
    )


def sharpness_check(inst: SharpnessInstance) -> dict:
    """D[mu_disk - tau_delta] against the potential-gap bound eps = delta^2/4.

    The gap bound comes from U(mu - tau) <= log cap V <= delta^2/4 on the
    circle; the reported ratio D/sqrt(eps) is the sharpness constant."""
    mu = equilibrium_boundary_measure(exterior_map(Disk(0.0, 1.0)))
    a, b = common_grid(mu, inst.tau)
    d = discrepancy(a, b).D
    eps = inst.delta**2 / 4.0
    return {"D": d, "eps": eps, "ratio": d / math.sqrt(eps)}
