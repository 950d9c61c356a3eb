"""Convex planar domains with arc-length boundary parameterizations.

Every domain kind (polygon, ellipse, disk) exposes the same boundary
protocol: a counter-clockwise arc-length parameter s in [0, perimeter),
an anchor point at s = 0, point evaluation, distance to the boundary
curve, and an interior/boundary/exterior classification.  Sub-arcs of
the boundary are value objects carrying their own wrap-around
bookkeeping so that an arc and its complement always account for the
full perimeter.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import brentq
from scipy.special import ellipeinc


class GeometryError(ValueError):
    """Base class for domain validation failures."""


class NonConvex(GeometryError):
    """Vertex chain is not strictly convex or is ordered clockwise."""


class Degenerate(GeometryError):
    """Repeated vertices, collinear triples, or vanishing radii."""


class NoConvergence(GeometryError):
    """An iterative boundary query exceeded its iteration budget."""


#: relative tolerance (times diameter) of the default boundary band
BOUNDARY_REL_TOL = 1e-10


@dataclass(frozen=True)
class BoundaryPoint:
    """A boundary location: arc-length parameter and its planar point."""

    s: float
    z: complex


@dataclass(frozen=True)
class BoundaryArc:
    """Closed boundary sub-arc traversed counter-clockwise from start to end.

    ``wraps`` marks arcs that pass through the parameter origin s = 0.
    For a non-wrapping arc start <= end; for a wrapping arc end <= start.
    """

    start: float
    end: float
    wraps: bool
    perimeter: float

    def __post_init__(self):
        P = self.perimeter
        if not (P > 0):
            raise GeometryError("arc needs a positive perimeter")
        if not (0 <= self.start <= P and 0 <= self.end <= P):
            raise GeometryError("arc endpoints must lie in [0, perimeter]")
        if self.wraps:
            if self.end > self.start:
                raise GeometryError("wrapping arc needs end <= start")
        else:
            if self.end < self.start:
                raise GeometryError("non-wrapping arc needs start <= end")

    @property
    def length(self) -> float:
        if self.wraps:
            return self.perimeter - (self.start - self.end)
        return self.end - self.start

    def complement(self) -> "BoundaryArc":
        # The complementary arc runs from end back around to start.  Its
        # wrap flag is the negation except for the two degenerate layouts
        # (empty and full arcs), which the constructor rules still accept.
        return BoundaryArc(self.end, self.start, not self.wraps, self.perimeter)

    def contains_param(self, s: float) -> bool:
        """Whether the (closed) arc contains the boundary parameter s."""
        s = s % self.perimeter
        if self.wraps:
            return s >= self.start or s <= self.end
        return self.start <= s <= self.end

    def endpoints_unwrapped(self) -> tuple[float, float]:
        """(start, end) with end lifted above start by the arc length."""
        return self.start, self.start + self.length


def arc_from_length(start: float, length: float, perimeter: float) -> BoundaryArc:
    """Arc beginning at ``start`` and extending ``length`` counter-clockwise."""
    if not (0 <= length <= perimeter):
        raise GeometryError("arc length must lie in [0, perimeter]")
    start = start % perimeter
    end = start + length
    if end > perimeter:
        # start + length - perimeter can land one ulp above start when
        # length == perimeter; clamp so the wrapping invariant holds
        return BoundaryArc(start, min(end - perimeter, start), True, perimeter)
    return BoundaryArc(start, end, False, perimeter)


class ConvexDomain:
    """Shared protocol for the bounded convex domains below."""

    kind = "abstract"

    # -- metrics ------------------------------------------------------
    @property
    def perimeter(self) -> float:
        raise NotImplementedError

    @property
    def diameter(self) -> float:
        raise NotImplementedError

    @property
    def area(self) -> float:
        raise NotImplementedError

    @property
    def interior_anchor(self) -> complex:
        """Distinguished interior point (centroid / center)."""
        raise NotImplementedError

    # -- boundary protocol --------------------------------------------
    def boundary_point(self, s: float) -> BoundaryPoint:
        s = float(s) % self.perimeter
        return BoundaryPoint(s, complex(self.boundary_points(np.array([s]))[0]))

    def boundary_points(self, s: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def boundary_param(self, z: complex) -> float:
        """Arc-length parameter of the boundary point nearest to z."""
        raise NotImplementedError

    def dist_to_boundary(self, z: complex) -> float:
        raise NotImplementedError

    def contains(self, z: complex, boundary_tol: float | None = None) -> str:
        """Classify z as 'interior', 'boundary', or 'exterior'.

        The boundary band has half-width ``boundary_tol`` (default
        BOUNDARY_REL_TOL times the diameter).
        """
        raise NotImplementedError

    def arc(self, start: float, length: float) -> BoundaryArc:
        return arc_from_length(start, length, self.perimeter)

    def full_arc(self) -> BoundaryArc:
        return BoundaryArc(0.0, 0.0, True, self.perimeter)

    def validate(self) -> None:
        """Re-run the construction-time invariant checks."""
        self._validate()

    def _validate(self) -> None:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def _boundary_tol(self, boundary_tol: float | None) -> float:
        if boundary_tol is None:
            return BOUNDARY_REL_TOL * self.diameter
        return float(boundary_tol)


@dataclass(frozen=True)
class Disk(ConvexDomain):
    center: complex
    radius: float

    kind = "disk"

    def __post_init__(self):
        self._validate()

    def _validate(self):
        if not (self.radius > 0) or not math.isfinite(self.radius):
            raise Degenerate("disk needs a positive finite radius")

    @property
    def perimeter(self):
        return 2 * math.pi * self.radius

    @property
    def diameter(self):
        return 2 * self.radius

    @property
    def area(self):
        return math.pi * self.radius**2

    @property
    def interior_anchor(self):
        return self.center

    def boundary_points(self, s):
        s = np.asarray(s, dtype=float)
        return self.center + self.radius * np.exp(1j * s / self.radius)

    def boundary_param(self, z):
        d = complex(z) - self.center
        if d == 0:
            return 0.0
        return (cmath.phase(d) % (2 * math.pi)) * self.radius

    def dist_to_boundary(self, z):
        return abs(self.radius - abs(complex(z) - self.center))

    def contains(self, z, boundary_tol=None):
        tol = self._boundary_tol(boundary_tol)
        r = abs(complex(z) - self.center)
        if abs(r - self.radius) <= tol:
            return "boundary"
        return "interior" if r < self.radius else "exterior"

    def to_dict(self):
        return {
            "kind": "disk",
            "center": [self.center.real, self.center.imag],
            "radius": self.radius,
        }


@dataclass(frozen=True)
class Ellipse(ConvexDomain):
    """Ellipse with semi-axes a >= b > 0, rotated by ``angle`` about center."""

    center: complex
    a: float
    b: float
    angle: float = 0.0

    kind = "ellipse"

    def __post_init__(self):
        self._validate()

    def _validate(self):
        if not (self.a >= self.b > 0) or not math.isfinite(self.a):
            raise Degenerate("ellipse needs finite semi-axes a >= b > 0")

    @cached_property
    def _m(self) -> float:
        # parameter of the incomplete elliptic integral of the second kind
        return 1.0 - (self.b / self.a) ** 2

    @cached_property
    def perimeter(self):
        return float(4 * self.a * ellipeinc(math.pi / 2, self._m))

    @property
    def diameter(self):
        return 2 * self.a

    @property
    def area(self):
        return math.pi * self.a * self.b

    @property
    def interior_anchor(self):
        return self.center

    # -- parametric angle <-> arc length ------------------------------
    def _arclen_from_t(self, t):
        """Arc length measured from parametric angle 0 (may be negative)."""
        m = self._m
        return self.a * (ellipeinc(math.pi / 2, m) - ellipeinc(math.pi / 2 - t, m))

    def _t_from_arclen(self, lam: float) -> float:
        P = self.perimeter
        lam = lam % P
        # s(t) is smooth and strictly increasing; bracket then solve.
        f = lambda t: self._arclen_from_t(t) - lam
        return brentq(f, 0.0, 2 * math.pi + 1e-12, xtol=1e-14, rtol=8.9e-16)

    @cached_property
    def _t_anchor(self) -> float:
        # parametric angle of the boundary point on the positive
        # horizontal ray from the center
        t0 = math.atan2(-self.a * math.sin(self.angle), self.b * math.cos(self.angle))
        return t0 % (2 * math.pi)

    @cached_property
    def _s_anchor(self) -> float:
        return self._arclen_from_t(self._t_anchor)

    def param_angle(self, s: float) -> float:
        """Parametric angle t of the boundary point at arc length s."""
        return self._t_from_arclen(self._s_anchor + (float(s) % self.perimeter))

    def point_at_angle(self, t):
        t = np.asarray(t, dtype=float)
        u = self.a * np.cos(t) + 1j * self.b * np.sin(t)
        return self.center + np.exp(1j * self.angle) * u

    def boundary_points(self, s):
        s = np.asarray(s, dtype=float)
        t = np.array([self.param_angle(v) for v in np.atleast_1d(s)])
        return self.point_at_angle(t.reshape(np.shape(s)))

    def arclen_of_angle(self, t: float) -> float:
        """Arc-length parameter s of the boundary point at parametric angle t."""
        return (self._arclen_from_t(t) - self._s_anchor) % self.perimeter

    def _frame(self, z: complex) -> complex:
        """Coordinates of z in the axis-aligned frame of the ellipse."""
        return (complex(z) - self.center) * cmath.exp(-1j * self.angle)

    def _nearest_t(self, z: complex) -> float:
        """Parametric angle of the boundary point closest to z."""
        w = self._frame(z)
        p, q = abs(w.real), abs(w.imag)
        a, b = self.a, self.b
        if p == 0 and q == 0:
            t = math.pi / 2
        elif q == 0:
            # on the major axis the foot of the normal can leave the axis
            xc = a * a * p / (a * a - b * b) if a > b else a
            if a > b and xc < a:
                t = math.acos(xc / a)
            else:
                t = 0.0
        elif p == 0:
            t = math.pi / 2
        else:
            g = lambda lam: (a * p / (lam + a * a)) ** 2 + (b * q / (lam + b * b)) ** 2 - 1.0
            lo = -b * b * (1 - 1e-14) + 1e-300
            hi = max(a * p, b * q, b * b)
            while g(hi) > 0:
                hi = 2 * hi + a * a
                if hi > 1e160:
                    raise NoConvergence("ellipse foot-point bracket failed")
            lam = brentq(g, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=200)
            t = math.atan2(b * q / (lam + b * b), a * p / (lam + a * a))
        # reflect back out of the first quadrant
        if w.real < 0:
            t = math.pi - t
        if w.imag < 0:
            t = -t
        return t % (2 * math.pi)

    def boundary_param(self, z):
        return self.arclen_of_angle(self._nearest_t(z))

    def dist_to_boundary(self, z):
        t = self._nearest_t(z)
        w = self._frame(z)
        foot = self.a * math.cos(t) + 1j * self.b * math.sin(t)
        return abs(w - foot)

    def contains(self, z, boundary_tol=None):
        tol = self._boundary_tol(boundary_tol)
        if self.dist_to_boundary(z) <= tol:
            return "boundary"
        w = self._frame(z)
        inside = (w.real / self.a) ** 2 + (w.imag / self.b) ** 2 < 1.0
        return "interior" if inside else "exterior"

    def to_dict(self):
        return {
            "kind": "ellipse",
            "center": [self.center.real, self.center.imag],
            "a": self.a,
            "b": self.b,
            "angle": self.angle,
        }


@dataclass(frozen=True)
class Polygon(ConvexDomain):
    """Strictly convex polygon, vertices in counter-clockwise order."""

    vertices: tuple[complex, ...]

    kind = "polygon"

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(complex(v) for v in self.vertices))
        self._validate()

    def _validate(self):
        v = self.vertices
        n = len(v)
        if n < 3:
            raise Degenerate("polygon needs at least three vertices")
        scale = max(abs(a - b) for a in v for b in v)
        if scale == 0:
            raise Degenerate("all vertices coincide")
        for i in range(n):
            if abs(v[i] - v[(i + 1) % n]) <= 1e-14 * scale:
                raise Degenerate("repeated vertices")
        turn_total = 0.0
        for i in range(n):
            e1 = v[(i + 1) % n] - v[i]
            e2 = v[(i + 2) % n] - v[(i + 1) % n]
            cross = (e1.conjugate() * e2).imag
            if abs(cross) <= 1e-14 * abs(e1) * abs(e2):
                raise Degenerate("three consecutive vertices are collinear")
            if cross < 0:
                raise NonConvex(
                    "vertex chain turns clockwise at index %d "
                    "(all interior angles must be < pi and the order ccw)" % ((i + 1) % n)
                )
            turn_total += math.atan2(cross, (e1.conjugate() * e2).real)
        if abs(turn_total - 2 * math.pi) > 1e-9:
            raise NonConvex("vertex chain winds more than once")

    @cached_property
    def _v(self) -> np.ndarray:
        return np.array(self.vertices, dtype=complex)

    @cached_property
    def _edges(self) -> np.ndarray:
        return np.roll(self._v, -1) - self._v

    @cached_property
    def side_lengths(self) -> np.ndarray:
        return np.abs(self._edges)

    @cached_property
    def _cum(self) -> np.ndarray:
        """Arc length of each vertex; _cum[0] = 0, _cum[n] = perimeter."""
        return np.concatenate([[0.0], np.cumsum(self.side_lengths)])

    @property
    def perimeter(self):
        return float(self._cum[-1])

    @cached_property
    def diameter(self):
        return float(max(abs(a - b) for a in self.vertices for b in self.vertices))

    @cached_property
    def area(self):
        v = self._v
        w = np.roll(v, -1)
        return float(0.5 * np.sum(v.real * w.imag - v.imag * w.real))

    @cached_property
    def interior_anchor(self):
        # area centroid
        v = self._v
        w = np.roll(v, -1)
        cross = v.real * w.imag - v.imag * w.real
        return complex(np.sum((v + w) * cross) / (6 * self.area))

    def vertex_param(self, k: int) -> float:
        """Arc-length parameter of vertex k."""
        return float(self._cum[k % len(self.vertices)])

    def boundary_points(self, s):
        s = np.asarray(s, dtype=float) % self.perimeter
        k = np.clip(np.searchsorted(self._cum, s, side="right") - 1, 0, len(self.vertices) - 1)
        frac = s - self._cum[k]
        return self._v[k] + frac * self._edges[k] / self.side_lengths[k]

    def _edge_projections(self, z: complex):
        """(distances, clamped offsets) of z onto every edge."""
        d = complex(z) - self._v
        t = (d.real * self._edges.real + d.imag * self._edges.imag) / self.side_lengths**2
        t = np.clip(t, 0.0, 1.0)
        feet = self._v + t * self._edges
        return np.abs(complex(z) - feet), t

    def boundary_param(self, z):
        dist, t = self._edge_projections(z)
        k = int(np.argmin(dist))
        return float(self._cum[k] + t[k] * self.side_lengths[k])

    def dist_to_boundary(self, z):
        dist, _ = self._edge_projections(z)
        return float(dist.min())

    def contains(self, z, boundary_tol=None):
        tol = self._boundary_tol(boundary_tol)
        if self.dist_to_boundary(z) <= tol:
            return "boundary"
        d = complex(z) - self._v
        cross = self._edges.real * d.imag - self._edges.imag * d.real
        return "interior" if np.all(cross > 0) else "exterior"

    def to_dict(self):
        return {
            "kind": "polygon",
            "vertices": [[v.real, v.imag] for v in self.vertices],
        }

    @cached_property
    def is_regular(self) -> bool:
        """Equal sides and equal interior angles, up to relative 1e-12."""
        L = self.side_lengths
        if np.ptp(L) > 1e-12 * L.max():
            return False
        return bool(np.ptp(self.angle_fractions) <= 1e-12)

    @cached_property
    def angle_fractions(self) -> np.ndarray:
        """Interior angle at each vertex divided by pi (values in (0, 1))."""
        prev = np.roll(self._edges, 1)
        # interior angle sits between the reversed incoming edge and the
        # outgoing edge; convexity puts it strictly inside (0, pi)
        return np.angle(-prev / self._edges) / math.pi


def domain_from_dict(data: dict) -> ConvexDomain:
    """Build a domain from its JSON-friendly dictionary form."""
    try:
        kind = data["kind"]
    except (TypeError, KeyError):
        raise GeometryError("domain dictionary needs a 'kind' field")
    if kind == "disk":
        return Disk(complex(*data["center"]), float(data["radius"]))
    if kind == "ellipse":
        return Ellipse(
            complex(*data["center"]),
            float(data["a"]),
            float(data["b"]),
            float(data.get("angle", 0.0)),
        )
    if kind == "polygon":
        return Polygon(tuple(complex(x, y) for x, y in data["vertices"]))
    raise GeometryError("unknown domain kind %r" % (kind,))


def regular_polygon(n: int, circumradius: float = 1.0, center: complex = 0.0,
                    phase: float = 0.0) -> Polygon:
    """Regular n-gon with vertices on the circle of the given radius."""
    verts = tuple(
        center + circumradius * cmath.exp(1j * (phase + 2 * math.pi * k / n))
        for k in range(n)
    )
    return Polygon(verts)
