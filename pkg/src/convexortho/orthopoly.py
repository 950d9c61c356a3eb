"""Orthonormal polynomials for weighted area measure on a convex domain.

The inner product is ``<f, g> = integral_G f(z) conj(g(z)) h(z) dm(z)`` with
``h`` either 1 or ``c * dist(z, boundary)**m``.  Polynomials are built by an
Arnoldi recurrence on the multiplication-by-z operator, which stays well
conditioned where a Gram matrix of monomials would not, and whose Hessenberg
matrix doubles as the comrade matrix used for root finding.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import ConvexDomain, Disk, Ellipse, Polygon, domain_from_dict
from .quadrules import disk_rule, ellipse_rule, triangle_rule

__all__ = [
    "Weight",
    "InnerProductEngine",
    "OrthoSequence",
    "QuadratureBudgetExceeded",
    "BreakdownAtDegree",
    "build_engine",
    "orthonormalize",
    "eval_poly",
    "eval_basis",
    "sup_norm",
    "leading_product",
]

N_MAX_DEFAULT = 40
# Breakdown is a cancellation test: the pivot is compared against the norm of
# z*Q_k before orthogonalization, so the threshold is scale invariant.
BREAKDOWN_RTOL = 1e-13
ADAPTIVE_RTOL = 1e-11
MAX_SPLIT_DEPTH = 26


class QuadratureBudgetExceeded(RuntimeError):
    """Adaptive refinement would exceed the node budget."""


class BreakdownAtDegree(RuntimeError):
    """Normalization pivot collapsed; the requested degree is not reachable.

    ``degree`` is the first degree whose polynomial could not be formed.
    """

    def __init__(self, degree: int, message: str | None = None):
        self.degree = degree
        super().__init__(message or f"orthogonalization broke down at degree {degree}")


@dataclass(frozen=True)
class Weight:
    """Weight function: ``unit`` or ``dist-power`` h(z) = c*dist(z,L)^m."""

    kind: str = "unit"
    m: float = 0.0
    c: float = 1.0

    def __post_init__(self):
        if self.kind not in ("unit", "dist-power"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.kind == "unit" and self.m != 0.0:
            raise ValueError("unit weight takes no exponent")
        if self.m < 0:
            raise ValueError("dist-power exponent must be >= 0")
        if self.c <= 0:
            raise ValueError("weight constant must be > 0")

    def to_dict(self) -> dict:
        if self.kind == "unit":
            return {"kind": "unit"}
        return {"kind": "dist-power", "m": self.m, "c": self.c}

    @staticmethod
    def from_dict(data: dict) -> "Weight":
        if data["kind"] == "unit":
            return Weight()
        return Weight("dist-power", float(data["m"]), float(data.get("c", 1.0)))


def _polygon_dist(vertices: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Distance from each point to the polygon boundary (nearest edge)."""
    d = np.full(z.shape, np.inf)
    n = len(vertices)
    for k in range(n):
        a = vertices[k]
        e = vertices[(k + 1) % n] - a
        t = np.clip(((z - a) * e.conjugate()).real / abs(e) ** 2, 0.0, 1.0)
        d = np.minimum(d, np.abs(z - a - t * e))
    return d


@dataclass
class InnerProductEngine:
    """Quadrature nodes/weights realizing the weighted area inner product.

    ``weights`` carry the weight function h; ``base_weights`` are the plain
    area weights of the same nodes (kept so the area identity stays checkable
    after h is folded in).
    """

    domain: ConvexDomain
    weight: Weight
    n_max: int
    degree: int
    nodes: np.ndarray
    weights: np.ndarray
    base_weights: np.ndarray

    def inner(self, fvals, gvals) -> complex:
        """<f, g> from node values.  np.sum is pairwise, so the reduction is
        deterministic regardless of how callers partition the work."""
        return complex(np.sum(self.weights * np.asarray(fvals) * np.conj(gvals)))

    @property
    def node_count(self) -> int:
        return self.nodes.size


def _weight_values(domain: ConvexDomain, weight: Weight, z: np.ndarray) -> np.ndarray:
    if weight.kind == "unit":
        return np.ones(z.shape)
    if isinstance(domain, Polygon):
        d = _polygon_dist(np.asarray(domain.vertices, dtype=complex), z)
    elif isinstance(domain, Disk):
        d = domain.radius - np.abs(z - domain.center)
    else:
        d = np.array([domain.dist_to_boundary(p) for p in z.ravel()]).reshape(z.shape)
    return weight.c * np.maximum(d, 0.0) ** weight.m


def _adaptive_fan(
    domain: Polygon,
    apex: complex,
    degree: int,
    weight: Weight,
    node_budget: int,
):
    """Fan triangulation with midpoint subdivision graded toward the boundary.

    A triangle is accepted once its own estimate agrees with the sum of its
    four children to within an area-proportional share of the global relative
    tolerance.  For the centroid fan of a regular polygon the m = 1 weight is
    linear on each fan triangle, so the initial fan is already exact.
    """
    verts = np.asarray(domain.vertices, dtype=complex)

    def rule(a, b, c):
        z, wq = triangle_rule(a, b, c, degree)
        h = _weight_values(domain, weight, z)
        return z, wq, h, float(np.sum(wq * h))

    fan = [(apex, verts[k], verts[(k + 1) % len(verts)]) for k in range(len(verts))]
    entries = [(tri, rule(*tri), 0) for tri in fan]
    total_est = sum(e[1][3] for e in entries)
    per_tri = entries[0][1][0].size
    tol_scale = ADAPTIVE_RTOL * max(total_est, 1e-300) / domain.area

    leaves = []
    spent = len(entries)
    stack = list(reversed(entries))
    while stack:
        (a, b, c), (z, wq, h, val), depth = stack.pop()
        mab, mbc, mca = (a + b) / 2, (b + c) / 2, (c + a) / 2
        kids = [(a, mab, mca), (mab, b, mbc), (mca, mbc, c), (mab, mbc, mca)]
        kid_entries = [(tri, rule(*tri)) for tri in kids]
        spent += 4
        if spent * per_tri > 8 * node_budget:
            raise QuadratureBudgetExceeded(
                f"adaptive refinement exceeded {node_budget} nodes"
            )
        err = abs(sum(e[1][3] for e in kid_entries) - val)
        area_t = 0.5 * abs(((b - a).conjugate() * (c - a)).imag)
        if err <= tol_scale * area_t or depth >= MAX_SPLIT_DEPTH:
            leaves.append((z, wq, h))
            if (len(leaves) + len(stack)) * per_tri > node_budget:
                raise QuadratureBudgetExceeded(
                    f"adaptive refinement exceeded {node_budget} nodes"
                )
        else:
            stack.extend((tri, r, depth + 1) for tri, r in kid_entries)

    nodes = np.concatenate([z for z, _, _ in leaves])
    base = np.concatenate([wq for _, wq, _ in leaves])
    hvals = np.concatenate([h for _, _, h in leaves])
    return nodes, base, hvals


def build_engine(
    domain: ConvexDomain,
    weight: Weight | None = None,
    n_max: int = N_MAX_DEFAULT,
    *,
    apex: complex | None = None,
    degree_margin: int = 0,
    node_budget: int = 3_000_000,
) -> InnerProductEngine:
    """Quadrature engine exact for polynomial pairs up to total degree 2*n_max.

    ``apex`` overrides the fan apex for polygons (must be interior); combined
    with ``degree_margin`` this yields an independent rule for cross-checks.
    For dist-power weights the polygon rule refines adaptively toward the
    boundary; disk/ellipse support integer exponents only, where the weight
    factor keeps the tensor rule degree-exact.
    """
    if weight is None:
        weight = Weight()
    degree = 2 * n_max + 2 + degree_margin
    if weight.kind == "dist-power":
        degree += 2 * math.ceil(weight.m) + 4

    if isinstance(domain, Polygon):
        if apex is None:
            apex = domain.interior_anchor
        elif domain.contains(complex(apex)) != "interior":
            raise ValueError("fan apex must lie inside the polygon")
        if weight.kind == "unit":
            verts = np.asarray(domain.vertices, dtype=complex)
            parts = [
                triangle_rule(apex, verts[k], verts[(k + 1) % len(verts)], degree)
                for k in range(len(verts))
            ]
            nodes = np.concatenate([p[0] for p in parts])
            base = np.concatenate([p[1] for p in parts])
            hvals = np.ones(nodes.shape)
        else:
            nodes, base, hvals = _adaptive_fan(
                domain, complex(apex), degree, weight, node_budget
            )
    elif isinstance(domain, (Disk, Ellipse)):
        if weight.kind == "dist-power" and weight.m != int(weight.m):
            raise NotImplementedError(
                "non-integer dist-power exponents need the polygon adaptive rule"
            )
        if isinstance(domain, Disk):
            nodes, base = disk_rule(domain.center, domain.radius, degree)
        else:
            nodes, base = ellipse_rule(
                domain.center, domain.a, domain.b, domain.angle, degree
            )
        hvals = _weight_values(domain, weight, nodes)
    else:
        raise TypeError(f"unsupported domain type {type(domain).__name__}")

    if nodes.size > node_budget:
        raise QuadratureBudgetExceeded(f"rule needs {nodes.size} > {node_budget} nodes")
    area = float(np.sum(base))
    if not (base > 0).all() or abs(area - domain.area) > 1e-12 * domain.area:
        raise RuntimeError("quadrature rule failed the area identity")
    return InnerProductEngine(
        domain=domain,
        weight=weight,
        n_max=n_max,
        degree=degree,
        nodes=nodes,
        weights=base * hvals,
        base_weights=base,
    )


@dataclass
class OrthoSequence:
    """Orthonormal polynomial family encoded by its multiplication recurrence.

    ``hessenberg[j, k]`` holds <z*Q_k, Q_j>; column k defines
    ``z*Q_k = sum_{j<=k+1} hessenberg[j, k] * Q_j``.  ``lam[n]`` is the
    leading coefficient of Q_n, kept alongside its log for products that
    would otherwise overflow.
    """

    N: int
    hessenberg: np.ndarray
    lam: np.ndarray
    lam_log: np.ndarray
    domain: ConvexDomain
    weight: Weight
    quadrature_degree: int
    gram_residual: float = field(default=float("nan"))

    def monomial_coeffs(self, n: int) -> np.ndarray:
        """Coefficients of Q_n in the monomial basis (diagnostic only; the
        conversion is exponentially ill conditioned for large n)."""
        if n > self.N:
            raise ValueError(f"degree {n} exceeds N={self.N}")
        coeffs = np.zeros((n + 1, n + 1), dtype=complex)
        coeffs[0, 0] = self.lam[0]
        h = self.hessenberg
        for k in range(n):
            nxt = np.zeros(n + 1, dtype=complex)
            nxt[1 : k + 2] = coeffs[k, : k + 1]
            for j in range(k + 1):
                nxt[: j + 1] -= h[j, k] * coeffs[j, : j + 1]
            coeffs[k + 1] = nxt / h[k + 1, k].real
        return coeffs[n, : n + 1]

    def to_dict(self) -> dict:
        dom = self.domain.to_dict()
        dom_json = json.dumps(dom, sort_keys=True)
        return {
            "kind": "ortho_sequence",
            "N": self.N,
            "hessenberg_real": self.hessenberg.real.tolist(),
            "hessenberg_imag": self.hessenberg.imag.tolist(),
            "lambda": self.lam.tolist(),
            "lambda_log": self.lam_log.tolist(),
            "domain": dom,
            "domain_hash": hashlib.sha256(dom_json.encode()).hexdigest(),
            "weight": self.weight.to_dict(),
            "quadrature_degree": self.quadrature_degree,
            "gram_residual": self.gram_residual,
        }

    @staticmethod
    def from_dict(data: dict) -> "OrthoSequence":
        if data.get("kind") != "ortho_sequence":
            raise ValueError("not a serialized orthonormal sequence")
        domain = domain_from_dict(data["domain"])
        dom_json = json.dumps(domain.to_dict(), sort_keys=True)
        if hashlib.sha256(dom_json.encode()).hexdigest() != data["domain_hash"]:
            raise ValueError("domain hash mismatch")
        hess = np.asarray(data["hessenberg_real"], dtype=float) + 1j * np.asarray(
            data["hessenberg_imag"], dtype=float
        )
        return OrthoSequence(
            N=int(data["N"]),
            hessenberg=hess,
            lam=np.asarray(data["lambda"], dtype=float),
            lam_log=np.asarray(data["lambda_log"], dtype=float),
            domain=domain,
            weight=Weight.from_dict(data["weight"]),
            quadrature_degree=int(data["quadrature_degree"]),
            gram_residual=float(data["gram_residual"]),
        )


def orthonormalize(engine: InnerProductEngine, N: int) -> OrthoSequence:
    """Build Q_0..Q_N by the Arnoldi recurrence on multiplication by z.

    Each step orthogonalizes z*Q_k against all previous polynomials twice
    (one full reorthogonalization pass), then normalizes.  Raises
    BreakdownAtDegree when the pivot loses ~13 digits to cancellation, which
    signals that the requested degree exceeds working precision.
    """
    z = engine.nodes
    w = engine.weights
    m = z.size
    vals = np.empty((N + 1, m), dtype=complex)
    hess = np.zeros((N + 1, N), dtype=complex)
    lam_log = np.empty(N + 1)

    g00 = float(np.sum(w))
    vals[0] = 1.0 / math.sqrt(g00)
    lam_log[0] = -0.5 * math.log(g00)

    for k in range(N):
        t = z * vals[k]
        nrm = math.sqrt(float(np.sum(w * (t * t.conj()).real)))
        for _ in range(2):
            for j in range(k + 1):
                hj = np.sum(w * t * vals[j].conj())
                t = t - hj * vals[j]
                hess[j, k] += hj
        pivot = math.sqrt(float(np.sum(w * (t * t.conj()).real)))
        if pivot < BREAKDOWN_RTOL * nrm:
            raise BreakdownAtDegree(k + 1)
        vals[k + 1] = t / pivot
        hess[k + 1, k] = pivot
        lam_log[k + 1] = lam_log[k] - math.log(pivot)

    gram = (vals * w) @ vals.conj().T
    gram_residual = float(np.max(np.abs(gram - np.eye(N + 1))))
    return OrthoSequence(
        N=N,
        hessenberg=hess,
        lam=np.exp(lam_log),
        lam_log=lam_log,
        domain=engine.domain,
        weight=engine.weight,
        quadrature_degree=engine.degree,
        gram_residual=gram_residual,
    )


def eval_basis(seq: OrthoSequence, n: int, z) -> np.ndarray:
    """Values of Q_0..Q_n at z, shape (n+1, *z.shape), via the Hessenberg
    forward recurrence (stable; never goes through monomial coefficients)."""
    if n > seq.N:
        raise ValueError(f"degree {n} exceeds N={seq.N}")
    zz = np.atleast_1d(np.asarray(z, dtype=complex))
    q = np.empty((n + 1,) + zz.shape, dtype=complex)
    q[0] = seq.lam[0]
    h = seq.hessenberg
    for k in range(n):
        acc = zz * q[k]
        acc -= np.tensordot(h[: k + 1, k], q[: k + 1], axes=(0, 0))
        q[k + 1] = acc / h[k + 1, k].real
    return q


def eval_poly(seq: OrthoSequence, n: int, z):
    """Q_n evaluated at z (scalar in, scalar out)."""
    vals = eval_basis(seq, n, z)[n]
    if np.isscalar(z) or np.asarray(z).ndim == 0:
        return complex(vals[0] if vals.ndim else vals)
    return vals


def _boundary_grid(domain: ConvexDomain, n: int) -> np.ndarray:
    per = domain.perimeter
    count = max(4096, 128 * n)
    s = np.arange(count) * (per / count)
    if isinstance(domain, Polygon):
        # |Q_n| often peaks at a corner; cluster geometrically toward each.
        sides = domain.side_lengths
        extra = [s]
        for k in range(len(sides)):
            sk = domain.vertex_param(k)
            offs = sides[k - 1] * 0.5 ** np.arange(1, 24)
            extra.append(np.array([sk]))
            extra.append((sk + sides[k] * 0.5 ** np.arange(1, 24)) % per)
            extra.append((sk - offs) % per)
        s = np.unique(np.concatenate(extra))
    return s


def sup_norm(seq: OrthoSequence, n: int) -> float:
    """max |Q_n| over the closure, searched on the boundary (maximum
    principle), with local grid refinement around the best point."""
    domain = seq.domain
    per = domain.perimeter
    s = _boundary_grid(domain, n)
    vals = np.abs(eval_basis(seq, n, domain.boundary_points(s))[n])
    best = int(np.argmax(vals))
    peak = float(vals[best])
    width = per / s.size
    center = float(s[best])
    for _ in range(3):
        fine = center + np.linspace(-width, width, 65)
        fv = np.abs(eval_basis(seq, n, domain.boundary_points(fine % per))[n])
        j = int(np.argmax(fv))
        peak = max(peak, float(fv[j]))
        center = float(fine[j])
        width /= 16.0
    return peak


def leading_product(seq: OrthoSequence, n: int, cap: float) -> float:
    """lambda_n * cap**n, formed in log space so neither factor overflows."""
    if n > seq.N:
        raise ValueError(f"degree {n} exceeds N={seq.N}")
    return math.exp(seq.lam_log[n] + n * math.log(cap))
