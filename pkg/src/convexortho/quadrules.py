"""Quadrature building blocks: Jacobi panels, triangle and disk area rules."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


@lru_cache(maxsize=None)
def gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


@lru_cache(maxsize=None)
def unit_rule(n: int, alpha_left: float = 0.0, alpha_right: float = 0.0):
    """Nodes/weights for integral_0^1 t^aL (1-t)^aR f(t) dt ~ sum w f(t).

    The endpoint weight factors are folded into w, so f is evaluated
    without them.  Plain Gauss-Legendre when both exponents vanish.
    """
    if alpha_left == 0.0 and alpha_right == 0.0:
        x, w = gauss_legendre(n)
        x = 0.5 * (x + 1.0)
        w = 0.5 * w
    else:
        # scipy's Jacobi weight is (1-x)^a (1+x)^b on [-1, 1]
        x, w = roots_jacobi(n, alpha_right, alpha_left)
        x = 0.5 * (x + 1.0)
        w = w * 0.5 ** (1.0 + alpha_left + alpha_right)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def segment_rule(beta: float, clearance: float, n: int = 24):
    """Composite rule for integral_0^1 t^beta g(t) dt with g evaluated bare.

    ``clearance`` is a lower bound, in units of the segment length, on the
    distance from [0, 1] to the nearest singularity of g.  Panel lengths
    never exceed it, and panels double geometrically away from t=0 so the
    folded t^beta factor stays resolved on the plain panels.
    """
    cap = float(min(max(clearance, 1e-3), 1.0))
    cuts = [0.0]
    h = cap
    while cuts[-1] < 1.0:
        cuts.append(min(cuts[-1] + h, 1.0))
        h = min(cap, cuts[-1])
    xs, ws = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        length = b - a
        if a == 0.0 and beta != 0.0:
            x, w = unit_rule(n, beta, 0.0)
            xs.append(length * x)
            ws.append(w * length ** (1.0 + beta))
        else:
            x, w = unit_rule(n)
            t = a + length * x
            xs.append(t)
            ws.append(w * length * t**beta)
    return np.concatenate(xs), np.concatenate(ws)


def triangle_rule(a: complex, b: complex, c: complex, degree: int):
    """Nodes/weights integrating polynomials of total degree <= degree in
    (x, y) over the triangle (a, b, c), via a collapsed tensor Gauss rule."""
    nu = (degree + 4) // 2
    nv = (degree + 3) // 2
    xu, wu = gauss_legendre(nu)
    xv, wv = gauss_legendre(nv)
    u = 0.5 * (xu + 1.0)
    v = 0.5 * (xv + 1.0)
    wu = 0.5 * wu
    wv = 0.5 * wv
    U, V = np.meshgrid(u, v, indexing="ij")
    Z = a + U * (b - a) + U * V * (c - b)
    area2 = abs(((b - a).conjugate() * (c - b)).imag)
    W = np.outer(wu * u, wv) * area2
    return Z.ravel(), W.ravel()


def polygon_fan_rule(vertices, apex: complex, degree: int):
    """Fan triangulation rule over a convex polygon."""
    v = np.asarray(vertices, dtype=complex)
    zs, ws = [], []
    for k in range(len(v)):
        z, w = triangle_rule(apex, v[k], v[(k + 1) % len(v)], degree)
        zs.append(z)
        ws.append(w)
    return np.concatenate(zs), np.concatenate(ws)


def disk_rule(center: complex, radius: float, degree: int):
    """Polar tensor rule over a disk, exact to the given total degree."""
    nr = degree // 2 + 2
    nt = degree + 2
    xr, wr = gauss_legendre(nr)
    r = 0.5 * (xr + 1.0)
    wr = 0.5 * wr * r  # radial area factor
    theta = 2 * math.pi * np.arange(nt) / nt
    R, T = np.meshgrid(r, theta, indexing="ij")
    Z = center + radius * R * np.exp(1j * T)
    W = np.outer(wr, np.full(nt, 2 * math.pi / nt)) * radius**2
    return Z.ravel(), W.ravel()


def ellipse_rule(center: complex, a: float, b: float, angle: float, degree: int):
    """Affine image of the unit-disk rule; exactness degree is preserved."""
    z, w = disk_rule(0.0, 1.0, degree)
    Z = center + np.exp(1j * angle) * (z.real * a + 1j * z.imag * b)
    return Z, w * (a * b)
