"""Exterior and interior conformal maps of convex domains.

Exterior maps send the complement of the closed unit disk onto the
complement of the domain with derivative cap > 0 at infinity; interior
maps send the unit disk onto the open domain with a chosen interior
anchor at the origin and positive derivative there.  Polygon maps use
Schwarz-Christoffel products; disks and ellipses have closed forms.
"""

from __future__ import annotations

import cmath
import math

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import least_squares

from .geometry import (BoundaryArc, ConvexDomain, Disk, Ellipse, NoConvergence,
                       Polygon, domain_from_dict)
from .quadrules import segment_rule, unit_rule

TWO_PI = 2.0 * math.pi

# fractional-power series around w = 0 converge on the open unit disk;
# this radius bounds the truncation error by ~0.7**SERIES_TERMS
SERIES_RADIUS = 0.7
SERIES_TERMS = 120

TABLE_DTHETA = TWO_PI * 1e-4
TABLE_DS = 1e-5  # arc-length resolution near corners, relative to perimeter
TABLE_MIN_PER_SIDE = 64

VERTEX_RTOL = 1e-8


class ParameterSolveFailed(RuntimeError):
    """Prevertex solve did not reach the required vertex residual."""


class OutsideDomainOfDefinition(ValueError):
    """Point handed to a map evaluation where the map is not defined."""


# ---------------------------------------------------------------------------
# shared Schwarz-Christoffel machinery
# ---------------------------------------------------------------------------

def _circ_dist_to_interval(x: float, lo: float, hi: float) -> float:
    """Circular distance from angle x to the angle interval [lo, hi]."""
    width = hi - lo
    u = (x - lo) % TWO_PI
    if u <= width:
        return 0.0
    return min(u - width, TWO_PI - u)


def _seg_point_dists(a: complex, b: complex, pts: np.ndarray) -> np.ndarray:
    """Distances from points to the segment [a, b]."""
    d = b - a
    L2 = abs(d) ** 2
    if L2 == 0.0:
        return np.abs(pts - a)
    t = np.clip(((pts - a) * np.conj(d)).real / L2, 0.0, 1.0)
    return np.abs(a + t * d - pts)


def _series_coeffs(prevertices: np.ndarray, exps: np.ndarray, terms: int) -> np.ndarray:
    """Taylor coefficients of prod_j (1 - z/w_j)^{e_j} at z = 0.

    Uses the power-sum recurrence k c_k = -sum_{m<=k} p_m c_{k-m} with
    p_m = sum_j e_j w_j^{-m}; exact to rounding for |w_j| = 1.
    """
    m = np.arange(1, terms + 1)
    p = (exps[None, :] * prevertices[None, :] ** (-m[:, None])).sum(axis=1)
    c = np.zeros(terms + 1, dtype=complex)
    c[0] = 1.0
    for k in range(1, terms + 1):
        c[k] = -(p[:k][::-1] * c[:k]).sum() / k
    return c


def _integrate_chord(a: complex, b: complex, prevertices: np.ndarray,
                     exps: np.ndarray, sing: int | None, pole: bool,
                     clearance: float, n: int = 24) -> complex:
    """Integral over the segment [a, b] of prod_j (1 - z/w_j)^{e_j},
    divided by z^2 when ``pole`` is set.

    ``sing`` names the prevertex sitting exactly at a; its fractional
    factor is handled by an endpoint-weighted rule, writing
    (1 - z/w_k)^e = t^e * c^e with c = -(b - a)/w_k, which is an exact
    principal-branch identity for t > 0.  All chords stay inside the
    closed unit disk, away from the outward branch cuts w_j*[1, inf).
    """
    d = b - a
    if d == 0.0:
        return 0.0 + 0.0j
    if sing is None:
        t, wt = segment_rule(0.0, clearance, n)
        zeta = a + t * d
        logh = (exps[None, :] * np.log(1.0 - zeta[:, None] / prevertices[None, :])).sum(axis=1)
        vals = np.exp(logh)
    else:
        beta = float(exps[sing])
        t, wt = segment_rule(beta, clearance, n)
        zeta = a + t * d
        mask = np.arange(len(prevertices)) != sing
        logh = (exps[None, mask] * np.log(1.0 - zeta[:, None] / prevertices[None, mask])).sum(axis=1)
        vals = np.exp(logh) * complex(-d / prevertices[sing]) ** beta
    if pole:
        vals = vals / (zeta * zeta)
    return complex(d * np.dot(wt, vals))


def _chord_clearance(a: complex, b: complex, prevertices: np.ndarray,
                     sing: int | None, pole: bool) -> float:
    """Distance from [a, b] to the nearest off-path singularity, relative
    to the chord length."""
    length = abs(b - a)
    if length == 0.0:
        return 1.0
    if sing is None:
        dists = _seg_point_dists(a, b, prevertices)
    else:
        others = prevertices[np.arange(len(prevertices)) != sing]
        dists = _seg_point_dists(a, b, others)
    dmin = dists.min() if len(dists) else math.inf
    if pole:
        dmin = min(dmin, float(_seg_point_dists(a, b, np.array([0.0 + 0.0j]))[0]))
    return dmin / length


def _rim_half(th0: float, direction: int, delta: float, k_end: int,
              angles: np.ndarray, exps: np.ndarray, clearance: float,
              n: int = 24) -> complex:
    """Ascending integral over half of a rim arc adjacent to prevertex k_end.

    Computes int prod_j (1 - e^{-i(theta-theta_j)})^{e_j} * i e^{i theta}
    d theta over [th0, th0+delta] (direction +1) or [th0-delta, th0]
    (direction -1), with the k_end factor's vanishing modulus folded into
    an endpoint-weighted rule.  Uses the exact polar form
    (1 - e^{-i phi})^e = (2 sin(phi/2))^e e^{i e (pi - phi)/2}.
    """
    beta = float(exps[k_end])
    t, wt = segment_rule(beta, clearance, n)
    theta = th0 + direction * t * delta
    phi = (theta[:, None] - angles[None, :]) % TWO_PI
    halfsin = 2.0 * np.sin(0.5 * phi)
    tD = t * delta
    halfsin[:, k_end] /= tD  # regularized: t^beta lives in the weights
    logmod = (exps[None, :] * np.log(halfsin)).sum(axis=1)
    phase = (exps[None, :] * 0.5 * (math.pi - phi)).sum(axis=1)
    f = np.exp(logmod + 1j * phase) * delta**beta
    f = f * 1j * np.exp(1j * theta)
    return complex(delta * np.dot(wt, f))


def _half_clearance(angles: np.ndarray, k_end: int, lo: float, hi: float) -> float:
    others = np.delete(angles, k_end)
    if len(others) == 0:
        return 1.0
    d = min(_circ_dist_to_interval(float(x), lo, hi) for x in others)
    return d / max(hi - lo, 1e-300)


def _side_vectors(angles: np.ndarray, exps: np.ndarray) -> np.ndarray:
    """Complex increments of the boundary image over each rim arc between
    consecutive prevertex angles (unit-scale convention)."""
    N = len(angles)
    out = np.empty(N, dtype=complex)
    for k in range(N):
        th_a = angles[k]
        th_b = angles[k + 1] if k + 1 < N else angles[0] + TWO_PI
        mid = 0.5 * (th_a + th_b)
        half = mid - th_a
        ka, kb = k, (k + 1) % N
        cla = _half_clearance(angles, ka, th_a, mid)
        clb = _half_clearance(angles, kb, mid, th_b)
        out[k] = (_rim_half(th_a, +1, half, ka, angles, exps, cla)
                  + _rim_half(th_b, -1, half, kb, angles, exps, clb))
    return out


def _build_boundary_table(angles: np.ndarray, exps: np.ndarray,
                          side_lengths: np.ndarray, cum: np.ndarray):
    """Tabulate arc length against prevertex-circle angle.

    The boundary speed along the rim is proportional to
    prod_j (2 sin((theta - theta_j)/2))^{e_j}; each side's cumulative
    integral is rescaled to its exact length, pinning vertex parameters.
    Intervals are bisected until both the angle step and (near corners,
    where the speed is a fractional power) the arc-length step are
    resolved, with geometric grading into each corner.  Returns strictly
    increasing knot arrays (s over one period, angle rising by 2 pi).
    """
    N = len(angles)
    gl_x, gl_w = unit_rule(8)
    gj_n = 12
    s_tol = TABLE_DS * float(cum[-1])
    s_parts = [np.array([0.0])]
    a_parts = [np.array([angles[0]])]
    for k in range(N):
        th_a = angles[k]
        th_b = angles[k + 1] if k + 1 < N else angles[0] + TWO_PI
        gap = th_b - th_a
        kb = (k + 1) % N

        def speed(theta, reg=None, reg_phi=None):
            phi = (theta[..., None] - angles) % TWO_PI
            w = 2.0 * np.sin(0.5 * phi)
            if reg is not None:
                w[..., reg] = w[..., reg] / reg_phi
            return np.exp((exps * np.log(w)).sum(axis=-1))

        def increment(lo, hi):
            # offsets measured from th_a; corner-touching intervals use the
            # endpoint-weighted rule that absorbs the fractional factor
            h = hi - lo
            if lo == 0.0:
                x, w = unit_rule(gj_n, float(exps[k]), 0.0)
                ph = h * x
                return h ** (1.0 + exps[k]) * float(np.dot(w, speed(th_a + ph, k, ph)))
            if hi == gap:
                x, w = unit_rule(gj_n, float(exps[kb]), 0.0)
                ph = h * x
                return h ** (1.0 + exps[kb]) * float(np.dot(w, speed(th_b - ph, kb, ph)))
            th = lo + th_a + h * gl_x
            return h * float(np.dot(gl_w, speed(th)))

        m = max(TABLE_MIN_PER_SIDE * N, int(math.ceil(gap / TABLE_DTHETA)))
        seeds = gap * np.arange(m + 1) / m
        # bulk pass over the uniform seed intervals, vectorized
        th_mid = th_a + seeds[1:-2, None] + (gap / m) * gl_x[None, :]
        inc_mid = (gap / m) * (speed(th_mid) * gl_w[None, :]).sum(axis=1)
        floor = 64.0 * np.finfo(float).eps * (abs(th_a) + gap)
        corner_zone = 0.05 * gap
        segments = []
        stack = []
        for i in range(m):
            lo, hi = float(seeds[i]), float(seeds[i + 1])
            if i == 0 or i == m - 1:
                stack.append((lo, hi, None))
            else:
                stack.append((lo, hi, float(inc_mid[i - 1])))
        while stack:
            lo, hi, inc = stack.pop()
            if inc is None:
                inc = increment(lo, hi)
            h = hi - lo
            near = min(lo, gap - hi)
            split = False
            if h > floor:
                if inc > s_tol and near < corner_zone:
                    split = True
                elif near > 0.0 and h > 0.6 * near:
                    split = True
            if split:
                mid = 0.5 * (lo + hi)
                stack.append((lo, mid, None))
                stack.append((mid, hi, None))
            else:
                segments.append((lo, hi, inc))
        segments.sort()
        offs = np.array([seg[1] for seg in segments])
        srel = np.cumsum([seg[2] for seg in segments])
        srel *= side_lengths[k] / srel[-1]
        # deepest corner stacks can underflow the running sum; drop knots
        # that do not advance s so the interpolant stays strictly monotone
        tol = 16.0 * np.finfo(float).eps * float(cum[-1])
        keep = np.empty(len(srel), dtype=bool)
        last = 0.0
        for j, val in enumerate(srel):
            keep[j] = val - last > tol
            if keep[j]:
                last = val
        keep[-1] = True
        if len(srel) > 1 and srel[-1] - srel[:-1][keep[:-1]].max(initial=0.0) <= tol:
            keep[np.nonzero(keep[:-1])[0][-1]] = False
        s_parts.append(cum[k] + srel[keep])
        a_parts.append(th_a + offs[keep])
    s_knots = np.concatenate(s_parts)
    a_knots = np.concatenate(a_parts)
    s_knots[-1] = cum[-1]
    a_knots[-1] = angles[0] + TWO_PI
    return s_knots, a_knots


class _MonotonePeriodic:
    """Monotone interpolation of a boundary correspondence, unwrapped so
    one period of arc length adds exactly 2 pi of angle."""

    def __init__(self, s_knots, a_knots, period_s):
        self._s = np.asarray(s_knots, dtype=float)
        self._a = np.asarray(a_knots, dtype=float)
        self._ps = float(period_s)
        self._fwd = PchipInterpolator(self._s, self._a)
        self._inv = PchipInterpolator(self._a, self._s)

    def angle_of(self, s):
        s = np.asarray(s, dtype=float)
        k = np.floor(s / self._ps)
        out = self._fwd(s - k * self._ps) + TWO_PI * k
        return out if out.ndim else float(out)

    def param_of(self, angle):
        a = np.asarray(angle, dtype=float)
        k = np.floor((a - self._a[0]) / TWO_PI)
        out = self._inv(a - TWO_PI * k) + self._ps * k
        return out if out.ndim else float(out)

    def to_lists(self):
        return self._s.tolist(), self._a.tolist()


# ---------------------------------------------------------------------------
# exterior maps
# ---------------------------------------------------------------------------

class ExteriorMapBase:
    """Common surface: capacity, boundary correspondence, evaluation."""

    domain: ConvexDomain
    capacity: float

    def theta_of_s(self, s):
        raise NotImplementedError

    def s_of_theta(self, theta):
        raise NotImplementedError

    def eval(self, z: complex) -> complex:
        raise NotImplementedError

    def eval_inverse(self, w: complex) -> complex:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


class DiskExteriorMap(ExteriorMapBase):
    def __init__(self, domain: Disk):
        self.domain = domain
        self.capacity = float(domain.radius)

    def theta_of_s(self, s):
        out = np.asarray(s, dtype=float) / self.domain.radius
        return out if out.ndim else float(out)

    def s_of_theta(self, theta):
        out = np.asarray(theta, dtype=float) * self.domain.radius
        return out if out.ndim else float(out)

    def eval(self, z):
        w = (complex(z) - self.domain.center) / self.domain.radius
        r = abs(w)
        if r < 1.0 - 1e-9:
            raise OutsideDomainOfDefinition("point is interior to the disk")
        return w / r if r < 1.0 else w

    def eval_inverse(self, w):
        w = complex(w)
        r = abs(w)
        if r < 1.0 - 1e-9:
            raise OutsideDomainOfDefinition("inverse map needs |w| >= 1")
        if r < 1.0:
            w /= r
        return self.domain.center + self.domain.radius * w

    def to_dict(self):
        return {"kind": "disk_exterior", "domain": self.domain.to_dict()}


class EllipseExteriorMap(ExteriorMapBase):
    """Joukowski form: the exterior of the unit circle maps through
    w -> R w + rho / w onto the exterior of an axis-aligned ellipse,
    then rotates and translates into place."""

    def __init__(self, domain: Ellipse):
        self.domain = domain
        self._R = 0.5 * (domain.a + domain.b)
        self._rho = 0.5 * (domain.a - domain.b)
        self._f = math.sqrt(max(domain.a**2 - domain.b**2, 0.0))
        self.capacity = float(self._R)

    def theta_of_s(self, s):
        # arg Phi on the boundary is the rotation angle plus the Joukowski
        # parametric angle; solve the unwrapped arclength relation so the
        # lift is strict through the parameter origin
        from scipy.optimize import brentq

        dom = self.domain
        P = dom.perimeter
        t0 = dom._t_anchor
        s0 = dom._s_anchor
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty_like(s_arr)
        for i, v in enumerate(s_arr):
            k = math.floor(v / P)
            rem = v - k * P
            if rem <= 0.0:
                t = t0
            else:
                t = brentq(lambda t_: dom._arclen_from_t(t_) - s0 - rem,
                           t0, t0 + TWO_PI + 1e-9, xtol=1e-14, rtol=8.9e-16)
            out[i] = dom.angle + t + TWO_PI * k
        return out.reshape(np.shape(s)) if np.ndim(s) else float(out[0])

    def s_of_theta(self, theta):
        dom = self.domain
        base = dom.angle + dom._t_anchor
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        k = np.floor((th - base) / TWO_PI)
        t = th - dom.angle - TWO_PI * k
        out = (np.array([dom._arclen_from_t(float(v)) for v in t])
               - dom._s_anchor + k * dom.perimeter)
        return out.reshape(np.shape(theta)) if np.ndim(theta) else float(out[0])

    def eval(self, z):
        dom = self.domain
        if dom.contains(z) == "interior":
            raise OutsideDomainOfDefinition("point is interior to the ellipse")
        if dom.contains(z) == "boundary":
            return cmath.exp(1j * self.theta_of_s(dom.boundary_param(z)))
        zeta = cmath.exp(-1j * dom.angle) * (complex(z) - dom.center)
        # sqrt(zeta - f) * sqrt(zeta + f) is the branch of sqrt(zeta^2 - f^2)
        # cut along the focal segment, asymptotic to zeta
        w = (zeta + cmath.sqrt(zeta - self._f) * cmath.sqrt(zeta + self._f)) / (2 * self._R)
        return cmath.exp(1j * dom.angle) * w

    def eval_inverse(self, w):
        w = complex(w)
        r = abs(w)
        if r < 1.0 - 1e-9:
            raise OutsideDomainOfDefinition("inverse map needs |w| >= 1")
        if r < 1.0:
            w /= r
        dom = self.domain
        wp = cmath.exp(-1j * dom.angle) * w
        return dom.center + cmath.exp(1j * dom.angle) * (self._R * wp + self._rho / wp)

    def to_dict(self):
        return {"kind": "ellipse_exterior", "domain": self.domain.to_dict()}


class PolygonExteriorMap(ExteriorMapBase):
    """Schwarz-Christoffel exterior map in the inverted variable w = 1/W.

    Internally Psi(W) = A + C * int^{1/W} prod_j (1 - z/w_j)^{beta_j} z^{-2} dz
    with C = -capacity and internal prevertices w_j = e^{-i theta_j}; the
    theta_j are the boundary angles arg Phi at the vertices, ascending
    with vertex index.
    """

    def __init__(self, domain: Polygon, theta: np.ndarray, capacity: float,
                 A: complex, tables=None):
        self.domain = domain
        self.prevertex_angles = np.asarray(theta, dtype=float)
        self.betas = 1.0 - np.asarray(domain.angle_fractions, dtype=float)
        self.capacity = float(capacity)
        self._A = complex(A)
        self._C = -self.capacity
        self._wk = np.exp(-1j * self.prevertex_angles)
        self._coeffs = _series_coeffs(self._wk, self.betas, SERIES_TERMS)
        self._table = None
        if tables is not None:
            self._table = _MonotonePeriodic(tables[0], tables[1], domain.perimeter)

    # -- series around w = 0 (z near infinity) -------------------------
    def _series_T(self, w: complex) -> complex:
        # antiderivative of h(z)/z^2 with the 1/z residue term kept for
        # the (tiny) solve leftovers in c_1
        c = self._coeffs
        m = np.arange(2, len(c))
        tail = (c[2:] * w ** (m - 1) / (m - 1)).sum()
        return -1.0 / w + c[1] * cmath.log(w) + tail

    def _h(self, w: complex) -> complex:
        return complex(np.exp((self.betas * np.log(1.0 - w / self._wk)).sum()))

    def _nearest_prevertex(self, w: complex) -> int:
        ang = cmath.phase(w)
        d = np.abs((np.angle(self._wk) - ang + math.pi) % TWO_PI - math.pi)
        return int(np.argmin(d))

    def _psi_disk(self, w: complex) -> complex:
        """Boundary-anchored evaluation of the inverted-plane integral."""
        r = abs(w)
        if r > 1.0:
            w /= r
            r = 1.0
        if r <= SERIES_RADIUS:
            return self._A + self._C * self._series_T(w)
        k = self._nearest_prevertex(w)
        a = self._wk[k]
        if abs(w - a) < 1e-14:
            return complex(self.domain.vertices[k])
        cl_chord = _chord_clearance(a, w, self._wk, k, True)
        p = SERIES_RADIUS * w / r
        cl_rad = _chord_clearance(p, w, self._wk, None, True)
        if cl_chord >= cl_rad:
            val = self.domain.vertices[k] + self._C * _integrate_chord(
                a, w, self._wk, self.betas, k, True, cl_chord)
        else:
            val = (self._A + self._C * self._series_T(p)
                   + self._C * _integrate_chord(p, w, self._wk, self.betas,
                                                None, True, cl_rad))
        return complex(val)

    # -- public evaluation ---------------------------------------------
    def eval_inverse(self, w):
        w = complex(w)
        r = abs(w)
        if r < 1.0 - 1e-9:
            raise OutsideDomainOfDefinition("inverse map needs |w| >= 1")
        if r < 1.0:
            w /= r
        return self._psi_disk(1.0 / w)

    def eval(self, z):
        z = complex(z)
        side = self.domain.contains(z)
        if side == "interior":
            raise OutsideDomainOfDefinition("point is interior to the polygon")
        if side == "boundary":
            return cmath.exp(1j * self.theta_of_s(self.domain.boundary_param(z)))
        scale = self.domain.diameter
        w = self.capacity / (z - self._A)
        if abs(w) > 0.95:
            w *= 0.95 / abs(w)
        w = self._newton(w, z, scale)
        if w is None:
            s_foot = self.domain.boundary_param(z)
            d = self.domain.dist_to_boundary(z)
            eps = min(0.3, 0.5 * d / self.capacity)
            w0 = (1.0 - max(eps, 1e-9)) * cmath.exp(-1j * self.theta_of_s(s_foot))
            w = self._newton(w0, z, scale)
        if w is None:
            raise NoConvergence("forward map iteration stalled")
        return 1.0 / w

    def _newton(self, w: complex, z: complex, scale: float) -> complex | None:
        tol = 1e-11 * scale
        F = self._psi_disk(w) - z
        for _ in range(60):
            if abs(F) <= tol:
                return w
            dpsi = self._C * self._h(w) / (w * w)
            step = -F / dpsi
            lam = 1.0
            for _ in range(12):
                w_new = w + lam * step
                r = abs(w_new)
                if r > 1.0:
                    w_new /= r * (1.0 + 1e-13)
                F_new = self._psi_disk(w_new) - z
                if abs(F_new) < abs(F):
                    break
                lam *= 0.5
            else:
                return None
            w, F = w_new, F_new
        return w if abs(F) <= tol else None

    # -- boundary correspondence ----------------------------------------
    def _ensure_table(self):
        if self._table is None:
            s_knots, a_knots = _build_boundary_table(
                self.prevertex_angles, self.betas,
                np.asarray(self.domain.side_lengths, dtype=float),
                self.domain._cum)
            self._table = _MonotonePeriodic(s_knots, a_knots, self.domain.perimeter)
        return self._table

    def theta_of_s(self, s):
        return self._ensure_table().angle_of(s)

    def s_of_theta(self, theta):
        return self._ensure_table().param_of(theta)

    def to_dict(self):
        s_list, a_list = self._ensure_table().to_lists()
        return {
            "kind": "polygon_exterior",
            "domain": self.domain.to_dict(),
            "capacity": self.capacity,
            "A": [self._A.real, self._A.imag],
            "prevertex_angles": self.prevertex_angles.tolist(),
            "table_s": s_list,
            "table_angle": a_list,
        }

    @classmethod
    def _from_dict(cls, data):
        domain = domain_from_dict(data["domain"])
        return cls(domain, np.array(data["prevertex_angles"]), data["capacity"],
                   complex(data["A"][0], data["A"][1]),
                   tables=(np.array(data["table_s"]), np.array(data["table_angle"])))


def _solve_exterior_polygon(poly: Polygon, max_nfev: int | None = None) -> PolygonExteriorMap:
    N = len(poly.vertices)
    betas = 1.0 - np.asarray(poly.angle_fractions, dtype=float)
    v = np.asarray(poly.vertices, dtype=complex)
    targets = np.roll(v, -1) - v
    ell_t = np.asarray(poly.side_lengths, dtype=float)
    ratio_t = ell_t / ell_t.sum()

    def theta_from_gaps(x):
        g = np.exp(np.concatenate([x, [0.0]]))
        g = TWO_PI * g / g.sum()
        return np.concatenate([[0.0], np.cumsum(g)[:-1]])

    if poly.is_regular:
        theta = np.angle(v - poly.interior_anchor)
        theta = theta[0] + np.concatenate([[0.0], np.cumsum((np.diff(theta)) % TWO_PI)])
    else:
        def resid(x):
            th = theta_from_gaps(x)
            J = _side_vectors(th, betas)
            ell = np.abs(J)
            sv = (betas * np.exp(1j * th)).sum()
            return np.concatenate([ell / ell.sum() - ratio_t, [sv.real, sv.imag]])

        gaps0 = math.pi * 0.5 * (betas + np.roll(betas, -1))
        x0 = np.log(gaps0 / gaps0[-1])[:-1]
        # diff_step well above sqrt(eps): the residual carries ~1e-12
        # quadrature noise, and the default step turns that into a noisy
        # Jacobian that stalls the iteration three digits early
        sol = least_squares(resid, x0, method="lm", xtol=1e-15, ftol=1e-15,
                            gtol=1e-15, diff_step=1e-5,
                            max_nfev=max_nfev or 400 * N)
        res_norm = float(np.max(np.abs(sol.fun)))
        if res_norm > 1e-7:
            raise ParameterSolveFailed(
                f"prevertex solve residual {res_norm:.3e} exceeds 1e-7")
        theta = theta_from_gaps(sol.x)

    # orientation and scale: rotating every theta by delta rotates the image
    # by delta; the unit-scale side vectors fix both
    J = _side_vectors(theta, betas)
    delta = float(np.angle((targets * np.conj(J)).sum()))
    theta = theta + delta
    theta -= TWO_PI * math.floor(theta[0] / TWO_PI)
    capacity = float((ell_t / np.abs(J)).mean())

    emap = PolygonExteriorMap(poly, theta, capacity, 0.0)
    # pin the translation so vertex 0 lands exactly, then check the rest
    w0 = emap._wk[0]
    p0 = SERIES_RADIUS * w0
    cl = _chord_clearance(w0, p0, emap._wk, 0, True)
    v0_raw = emap._C * (emap._series_T(p0) - _integrate_chord(
        w0, p0, emap._wk, emap.betas, 0, True, cl))
    emap._A = complex(v[0] - v0_raw)
    worst = 0.0
    for k in range(N):
        wk = emap._wk[k]
        pk = SERIES_RADIUS * wk
        cl = _chord_clearance(wk, pk, emap._wk, k, True)
        got = emap._A + emap._C * (emap._series_T(pk) - _integrate_chord(
            wk, pk, emap._wk, emap.betas, k, True, cl))
        worst = max(worst, abs(got - v[k]))
    if worst > VERTEX_RTOL * poly.diameter:
        raise ParameterSolveFailed(
            f"vertex mismatch {worst:.3e} exceeds {VERTEX_RTOL:.0e} * diameter")
    return emap


# ---------------------------------------------------------------------------
# interior maps
# ---------------------------------------------------------------------------

class InteriorMapBase:
    domain: ConvexDomain
    anchor: complex

    def eta_of_s(self, s):
        raise NotImplementedError

    def s_of_eta(self, eta):
        raise NotImplementedError

    def eval(self, z: complex) -> complex:
        raise NotImplementedError

    def eval_inverse(self, u: complex) -> complex:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


class DiskInteriorMap(InteriorMapBase):
    """Mobius automorphism pulling the anchor to the origin; with the
    anchor at the center it reduces to (z - c)/r."""

    def __init__(self, domain: Disk, anchor: complex | None = None):
        self.domain = domain
        self.anchor = complex(anchor) if anchor is not None else domain.center
        self._m = (self.anchor - domain.center) / domain.radius
        if abs(self._m) >= 1.0:
            raise OutsideDomainOfDefinition("anchor must be interior")

    def eval(self, z):
        u = (complex(z) - self.domain.center) / self.domain.radius
        r = abs(u)
        if r > 1.0 + 1e-9:
            raise OutsideDomainOfDefinition("point is exterior to the disk")
        if r > 1.0:
            u /= r
        m = self._m
        return (u - m) / (1.0 - m.conjugate() * u)

    def eval_inverse(self, u):
        u = complex(u)
        r = abs(u)
        if r > 1.0 + 1e-9:
            raise OutsideDomainOfDefinition("inverse map needs |u| <= 1")
        if r > 1.0:
            u /= r
        m = self._m
        z = (u + m) / (1.0 + m.conjugate() * u)
        return self.domain.center + self.domain.radius * z

    def eta_of_s(self, s):
        # arg of the boundary image: t - 2 arg(1 - conj(m) e^{it}) is a
        # smooth exact lift since Re(1 - conj(m) e^{it}) > 0
        t = np.asarray(s, dtype=float) / self.domain.radius
        q = 1.0 - self._m.conjugate() * np.exp(1j * t)
        base = 1.0 - self._m.conjugate()
        out = t - 2.0 * (np.arctan2(q.imag, q.real) - math.atan2(base.imag, base.real))
        return out if out.ndim else float(out)

    def s_of_eta(self, eta):
        eta_arr = np.atleast_1d(np.asarray(eta, dtype=float))
        out = np.empty_like(eta_arr)
        P = self.domain.perimeter
        for i, e in enumerate(eta_arr):
            k = math.floor(e / TWO_PI)
            e_red = e - TWO_PI * k
            lo, hi = 0.0, P

            def f(s):
                return float(self.eta_of_s(s)) - e_red
            # eta_of_s is strictly increasing with range exactly 2 pi
            from scipy.optimize import brentq
            out[i] = brentq(f, lo, hi, xtol=1e-13) + k * P
        return out.reshape(np.shape(eta)) if np.ndim(eta) else float(out[0])

    def to_dict(self):
        return {"kind": "disk_interior", "domain": self.domain.to_dict(),
                "anchor": [self.anchor.real, self.anchor.imag]}


class PolygonInteriorMap(InteriorMapBase):
    """Schwarz-Christoffel map of the unit disk onto the polygon with
    psi(0) at the anchor and real positive derivative there."""

    def __init__(self, domain: Polygon, eta: np.ndarray, scale: float,
                 anchor: complex, tables=None):
        self.domain = domain
        self.prevertex_angles = np.asarray(eta, dtype=float)
        self.alphas = np.asarray(domain.angle_fractions, dtype=float)
        self._exps = self.alphas - 1.0
        self._Ci = float(scale)
        self.anchor = complex(anchor)
        self._uk = np.exp(1j * self.prevertex_angles)
        self._coeffs = _series_coeffs(self._uk, self._exps, SERIES_TERMS)
        self._table = None
        if tables is not None:
            self._table = _MonotonePeriodic(tables[0], tables[1], domain.perimeter)

    def _series_S(self, zeta: complex) -> complex:
        c = self._coeffs
        m = np.arange(len(c))
        return complex((c * zeta ** (m + 1) / (m + 1)).sum())

    def _h(self, zeta: complex) -> complex:
        return complex(np.exp((self._exps * np.log(1.0 - zeta / self._uk)).sum()))

    def _nearest_prevertex(self, zeta: complex) -> int:
        ang = cmath.phase(zeta)
        d = np.abs((self.prevertex_angles - ang + math.pi) % TWO_PI - math.pi)
        return int(np.argmin(d))

    def _psi(self, zeta: complex) -> complex:
        r = abs(zeta)
        if r > 1.0:
            zeta /= r
            r = 1.0
        if r <= SERIES_RADIUS:
            return self.anchor + self._Ci * self._series_S(zeta)
        k = self._nearest_prevertex(zeta)
        a = self._uk[k]
        if abs(zeta - a) < 1e-14:
            return complex(self.domain.vertices[k])
        cl_chord = _chord_clearance(a, zeta, self._uk, k, False)
        p = SERIES_RADIUS * zeta / r
        cl_rad = _chord_clearance(p, zeta, self._uk, None, False)
        if cl_chord >= cl_rad:
            val = self.domain.vertices[k] + self._Ci * _integrate_chord(
                a, zeta, self._uk, self._exps, k, False, cl_chord)
        else:
            val = (self.anchor + self._Ci * self._series_S(p)
                   + self._Ci * _integrate_chord(p, zeta, self._uk, self._exps,
                                                 None, False, cl_rad))
        return complex(val)

    def eval_inverse(self, u):
        u = complex(u)
        r = abs(u)
        if r > 1.0 + 1e-9:
            raise OutsideDomainOfDefinition("inverse map needs |u| <= 1")
        return self._psi(u if r <= 1.0 else u / r)

    def eval(self, z):
        z = complex(z)
        side = self.domain.contains(z)
        if side == "exterior":
            raise OutsideDomainOfDefinition("point is exterior to the polygon")
        if side == "boundary":
            return cmath.exp(1j * self.eta_of_s(self.domain.boundary_param(z)))
        scale = self.domain.diameter
        zeta0 = (z - self.anchor) / self._Ci
        if abs(zeta0) > 0.9:
            zeta0 *= 0.9 / abs(zeta0)
        zeta = self._newton(zeta0, z, scale)
        if zeta is None:
            s_foot = self.domain.boundary_param(z)
            zeta0 = 0.95 * cmath.exp(1j * self.eta_of_s(s_foot))
            zeta = self._newton(zeta0, z, scale)
        if zeta is None:
            raise NoConvergence("interior forward map iteration stalled")
        return zeta

    def _newton(self, zeta: complex, z: complex, scale: float) -> complex | None:
        tol = 1e-11 * scale
        F = self._psi(zeta) - z
        for _ in range(60):
            if abs(F) <= tol:
                return zeta
            step = -F / (self._Ci * self._h(zeta))
            lam = 1.0
            for _ in range(12):
                znew = zeta + lam * step
                r = abs(znew)
                if r > 1.0:
                    znew /= r * (1.0 + 1e-13)
                F_new = self._psi(znew) - z
                if abs(F_new) < abs(F):
                    break
                lam *= 0.5
            else:
                return None
            zeta, F = znew, F_new
        return zeta if abs(F) <= tol else None

    def _ensure_table(self):
        if self._table is None:
            s_knots, a_knots = _build_boundary_table(
                self.prevertex_angles, self._exps,
                np.asarray(self.domain.side_lengths, dtype=float),
                self.domain._cum)
            self._table = _MonotonePeriodic(s_knots, a_knots, self.domain.perimeter)
        return self._table

    def eta_of_s(self, s):
        return self._ensure_table().angle_of(s)

    def s_of_eta(self, eta):
        return self._ensure_table().param_of(eta)

    def to_dict(self):
        s_list, a_list = self._ensure_table().to_lists()
        return {
            "kind": "polygon_interior",
            "domain": self.domain.to_dict(),
            "anchor": [self.anchor.real, self.anchor.imag],
            "scale": self._Ci,
            "prevertex_angles": self.prevertex_angles.tolist(),
            "table_s": s_list,
            "table_angle": a_list,
        }

    @classmethod
    def _from_dict(cls, data):
        domain = domain_from_dict(data["domain"])
        return cls(domain, np.array(data["prevertex_angles"]), data["scale"],
                   complex(data["anchor"][0], data["anchor"][1]),
                   tables=(np.array(data["table_s"]), np.array(data["table_angle"])))


def _interior_vertex_integrals(uk: np.ndarray, exps: np.ndarray) -> np.ndarray:
    """Integrals of the prevertex product from 0 out to each prevertex."""
    N = len(uk)
    out = np.empty(N, dtype=complex)
    for k in range(N):
        cl = _chord_clearance(uk[k], 0.0, uk, k, False)
        out[k] = -_integrate_chord(uk[k], 0.0, uk, exps, k, False, cl)
    return out


def _solve_interior_polygon(poly: Polygon, anchor: complex,
                            max_nfev: int | None = None) -> PolygonInteriorMap:
    if poly.contains(anchor) != "interior":
        raise OutsideDomainOfDefinition("interior anchor must lie inside")
    N = len(poly.vertices)
    exps = np.asarray(poly.angle_fractions, dtype=float) - 1.0
    v = np.asarray(poly.vertices, dtype=complex)
    diam = poly.diameter

    # vertex directions seen from the anchor are exact for regular
    # polygons anchored at the centroid and a strong start otherwise
    dirs = np.angle(v - anchor)
    eta0 = dirs[0] + np.concatenate([[0.0], np.cumsum(np.diff(dirs) % TWO_PI)])

    def eta_from_x(x):
        g = np.exp(np.concatenate([x[:-1], [0.0]]))
        g = TWO_PI * g / g.sum()
        return x[-1] + np.concatenate([[0.0], np.cumsum(g)[:-1]])

    def scale_and_resid(eta):
        uk = np.exp(1j * eta)
        I = _interior_vertex_integrals(uk, exps)
        num = (np.conj(I) * (v - anchor)).real.sum()
        C = max(num / (np.abs(I) ** 2).sum(), 1e-12 * diam)
        r = (anchor + C * I - v) / diam
        return C, r

    fast = poly.is_regular and abs(anchor - poly.interior_anchor) <= 1e-12 * diam
    if fast:
        eta = eta0
    else:
        gaps0 = np.diff(np.concatenate([eta0, [eta0[0] + TWO_PI]]))
        x0 = np.concatenate([np.log(gaps0 / gaps0[-1])[:-1], [eta0[0]]])

        def resid(x):
            _, r = scale_and_resid(eta_from_x(x))
            return np.concatenate([r.real, r.imag])

        sol = least_squares(resid, x0, method="lm", xtol=1e-15, ftol=1e-15,
                            gtol=1e-15, diff_step=1e-5,
                            max_nfev=max_nfev or 400 * N)
        eta = eta_from_x(sol.x)

    C, r = scale_and_resid(eta)
    worst = float(np.max(np.abs(r))) * diam
    if worst > VERTEX_RTOL * diam:
        raise ParameterSolveFailed(
            f"vertex mismatch {worst:.3e} exceeds {VERTEX_RTOL:.0e} * diameter")
    eta = eta - TWO_PI * math.floor(eta[0] / TWO_PI)
    return PolygonInteriorMap(poly, eta, C, anchor)


# ---------------------------------------------------------------------------
# factories, caching, serialization
# ---------------------------------------------------------------------------

_EXT_CACHE: dict[str, ExteriorMapBase] = {}
_INT_CACHE: dict[str, InteriorMapBase] = {}


def _domain_key(domain: ConvexDomain) -> str:
    import json
    return json.dumps(domain.to_dict(), sort_keys=True)


def exterior_map(domain: ConvexDomain) -> ExteriorMapBase:
    """Conformal map data for the complement of the domain; cached."""
    key = _domain_key(domain)
    if key not in _EXT_CACHE:
        if isinstance(domain, Disk):
            _EXT_CACHE[key] = DiskExteriorMap(domain)
        elif isinstance(domain, Ellipse):
            _EXT_CACHE[key] = EllipseExteriorMap(domain)
        elif isinstance(domain, Polygon):
            _EXT_CACHE[key] = _solve_exterior_polygon(domain)
        else:
            raise TypeError(f"unsupported domain {type(domain).__name__}")
    return _EXT_CACHE[key]


def interior_map(domain: ConvexDomain, anchor: complex | None = None) -> InteriorMapBase:
    """Conformal map of the unit disk onto the domain; cached per anchor.

    Provided for disks and polygons; ellipse interiors are out of scope.
    """
    z0 = complex(anchor) if anchor is not None else complex(domain.interior_anchor)
    key = _domain_key(domain) + f"|{z0.real!r},{z0.imag!r}"
    if key not in _INT_CACHE:
        if isinstance(domain, Disk):
            _INT_CACHE[key] = DiskInteriorMap(domain, z0)
        elif isinstance(domain, Polygon):
            _INT_CACHE[key] = _solve_interior_polygon(domain, z0)
        elif isinstance(domain, Ellipse):
            raise NotImplementedError("interior map of an ellipse is not provided")
        else:
            raise TypeError(f"unsupported domain {type(domain).__name__}")
    return _INT_CACHE[key]


def capacity(domain: ConvexDomain) -> float:
    """Logarithmic capacity of the closed domain."""
    return exterior_map(domain).capacity


def map_from_dict(data: dict):
    kind = data.get("kind")
    if kind == "disk_exterior":
        return DiskExteriorMap(domain_from_dict(data["domain"]))
    if kind == "ellipse_exterior":
        return EllipseExteriorMap(domain_from_dict(data["domain"]))
    if kind == "polygon_exterior":
        return PolygonExteriorMap._from_dict(data)
    if kind == "disk_interior":
        return DiskInteriorMap(domain_from_dict(data["domain"]),
                               complex(data["anchor"][0], data["anchor"][1]))
    if kind == "polygon_interior":
        return PolygonInteriorMap._from_dict(data)
    raise ValueError(f"unknown map kind {kind!r}")


# ---------------------------------------------------------------------------
# measures of boundary arcs
# ---------------------------------------------------------------------------

def equilibrium_measure(emap: ExteriorMapBase, arc: BoundaryArc) -> float:
    """Mass that the equilibrium distribution of the boundary puts on the
    arc: the argument swept by the exterior map over it, divided by 2 pi."""
    s0, s1 = arc.endpoints_unwrapped()
    return float(emap.theta_of_s(s1) - emap.theta_of_s(s0)) / TWO_PI


def poisson_arc_measure(u, eta0, eta1):
    """Harmonic measure in the unit disk of the boundary arc from angle
    eta0 to eta1 (counterclockwise), at interior points u.  Broadcasts.

    Closed form from the Poisson-kernel antiderivative 2 arg(e^{i eta} - u)
    - eta; the continuous branch over a sub-arc lies in (0, 2 pi), which
    pins the principal-value lift.
    """
    u = np.asarray(u, dtype=complex)
    eta0 = np.asarray(eta0, dtype=float)
    eta1 = np.asarray(eta1, dtype=float)
    deta = eta1 - eta0
    a = np.exp(1j * eta0)
    b = np.exp(1j * eta1)
    pv = np.angle((b - u) / (a - u))
    lift = np.where(pv > 0, pv, pv + TWO_PI)
    val = (2.0 * lift - deta) / TWO_PI
    out = np.where(deta <= 0.0, 0.0, np.where(deta >= TWO_PI, 1.0, val))
    return out if out.ndim else float(out)


def harmonic_measure(imap: InteriorMapBase, z: complex, arc: BoundaryArc) -> float:
    """Harmonic measure of the boundary arc at z.

    Interior z goes through the disk closed form; boundary z follows the
    convention that the measure is 1 on the arc and 0 off it.
    """
    dom = imap.domain
    z = complex(z)
    side = dom.contains(z)
    if side == "boundary":
        return 1.0 if arc.contains_param(dom.boundary_param(z)) else 0.0
    if side == "exterior":
        raise OutsideDomainOfDefinition("harmonic measure needs z in the closure")
    u = imap.eval(z)
    if abs(u) >= 1.0:
        u *= (1.0 - 1e-13) / abs(u)
    s0, s1 = arc.endpoints_unwrapped()
    return float(poisson_arc_measure(u, imap.eta_of_s(s0), imap.eta_of_s(s1)))


# ---------------------------------------------------------------------------
# Laurent data at infinity
# ---------------------------------------------------------------------------

def laurent_coefficients(emap: ExteriorMapBase, count: int):
    """Leading coefficients of the inverse exterior map at infinity:
    Psi(w) = cap*w + b_0 + b_1/w + ...; returns (cap, array of b_0..b_{count-1}).

    Trapezoid contour integration on |w| = 1.5; exact for band-limited
    integrands, so the truncation error decays geometrically.
    """
    if count < 1:
        return emap.capacity, np.zeros(0, dtype=complex)
    R = 1.5
    M = max(256, 8 * count)
    wj = R * np.exp(2j * math.pi * np.arange(M) / M)
    zj = np.array([emap.eval_inverse(w) for w in wj])
    chat = np.fft.fft(zj) / M
    b = np.empty(count, dtype=complex)
    b[0] = chat[0]
    for k in range(1, count):
        b[k] = chat[M - k] * R**k
    return float(emap.capacity), b
