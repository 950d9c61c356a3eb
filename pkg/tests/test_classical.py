"""Faber and Chebyshev families, and the disk-plus-needle construction."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from convexortho.classical import (
    ChebyshevResult,
    LawsonStall,
    chebyshev,
    faber,
    faber_derivative_norms,
    sharpness_check,
    sharpness_instance,
)
from convexortho.conformal import exterior_map
from convexortho.geometry import Disk, Ellipse, Polygon, regular_polygon

SQUARE2 = Polygon((1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j))
ELLIPSE = Ellipse(0.0, 2.0, 1.0, 0.0)
HEXAGON = regular_polygon(6)


@pytest.fixture(scope="module")
def em_disk():
    return exterior_map(Disk(0.0, 1.0))


@pytest.fixture(scope="module")
def em_square():
    return exterior_map(SQUARE2)


@pytest.fixture(scope="module")
def em_ellipse():
    return exterior_map(ELLIPSE)


@pytest.fixture(scope="module")
def fs_square(em_square):
    return faber(em_square, 31)


def _contour_oracle(emap, n, R=3.0, M=1024):
    """Least-squares fit of Phi(z)^n on |z| = R by a degree-n polynomial.

    Monomials are orthogonal on the circle, so the fit is the Fourier
    projection onto degrees 0..n; the negative-power remainder of Phi^n is
    annihilated and the projection is exactly the polynomial part."""
    t = R * np.exp(2j * np.pi * np.arange(M) / M)
    vals = np.array([emap.eval(z) ** n for z in t])
    scale = R ** np.arange(n + 1)
    design = np.vander(t, n + 1, increasing=True) / scale
    c, *_ = np.linalg.lstsq(design, vals, rcond=None)
    return c / scale


class TestFaber:
    def test_disk_monomials(self, em_disk):
        fs = faber(em_disk, 12)
        for n in range(13):
            row = fs.coeffs[n, : n + 1]
            assert abs(row[n] - 1.0) < 1e-12
            if n:
                assert np.max(np.abs(row[:n])) < 1e-12
        assert np.max(np.abs(fs.norms() - 1.0)) < 1e-9
        dn = fs.derivative_norms()
        assert np.max(np.abs(dn - np.arange(1, 13))) < 1e-8

    def test_leading_coefficient_normalization(self, fs_square, em_ellipse):
        for fs in (fs_square, faber(em_ellipse, 16)):
            cap = fs.capacity
            for n in range(fs.N + 1):
                lead = fs.coeffs[n, n]
                assert abs(lead * cap**n - 1.0) < 1e-8

    def test_ellipse_low_degree_closed_forms(self, em_ellipse):
        fs = faber(em_ellipse, 4)
        assert np.allclose(fs.coeffs[1, :2], [0.0, 1 / 1.5], atol=1e-10)
        assert np.allclose(
            fs.coeffs[2, :3], [-1.5 / 1.5**2, 0.0, 1 / 1.5**2], atol=1e-10
        )

    @pytest.mark.parametrize("domain_name", ["disk", "ellipse", "square"])
    def test_contour_oracle_agreement(
        self, domain_name, em_disk, em_ellipse, em_square
    ):
        em = {"disk": em_disk, "ellipse": em_ellipse, "square": em_square}[
            domain_name
        ]
        fs = faber(em, 15)
        for n in range(16):
            oracle = _contour_oracle(em, n)
            assert np.max(np.abs(fs.coeffs[n, : n + 1] - oracle)) < 1e-7

    def test_ngon_norm_bound(self, fs_square):
        # polygon Faber norms stay below 2 (small slack for the grid sup)
        assert np.all(fs_square.norms()[:31] <= 2.0 * (1 + 1e-6))
        fs_hex = faber(exterior_map(HEXAGON), 30)
        assert np.all(fs_hex.norms() <= 2.0 * (1 + 1e-6))

    def test_derivative_growth_square(self, fs_square):
        dn = faber_derivative_norms(fs_square)
        assert abs(dn[0] - 1.0 / fs_square.capacity) < 1e-9
        ratio = dn[:30] / (np.arange(1, 31) + 1.0) ** 2
        assert ratio.max() / ratio.min() <= 10.0

    def test_eval_and_degree_validation(self, fs_square):
        z = 0.3 + 0.2j
        direct = sum(
            fs_square.coeffs[5, k] * z**k for k in range(6)
        )
        assert abs(fs_square.eval(5, z) - direct) < 1e-12
        arr = fs_square.eval(5, np.array([z, 2 * z]))
        assert arr.shape == (2,)
        with pytest.raises(ValueError):
            fs_square.eval(32, z)


class TestChebyshev:
    def test_disk_monomial(self, em_disk):
        r = chebyshev(Disk(0.0, 1.0), em_disk, 6)
        assert r.converged
        assert np.max(np.abs(r.coeffs[:6])) < 1e-6
        assert abs(r.coeffs[6] - 1.0) == 0.0
        assert abs(r.norm - 1.0) < 1e-9

    def test_square_t1_chebyshev_radius(self, em_square):
        r = chebyshev(SQUARE2, em_square, 1)
        assert r.converged
        # golden-section oracle: minimize max |z - t| over real t
        s = np.linspace(0, SQUARE2.perimeter, 16385)[:-1]
        zb = SQUARE2.boundary_points(s)

        def f(t):
            return float(np.max(np.abs(zb - t)))

        a, b = -1.0, 1.0
        gr = (math.sqrt(5) - 1) / 2
        c, d = b - gr * (b - a), a + gr * (b - a)
        for _ in range(120):
            if f(c) < f(d):
                b, d = d, c
                c = b - gr * (b - a)
            else:
                a, c = c, d
                d = a + gr * (b - a)
        oracle = f((a + b) / 2)
        assert abs(r.norm - oracle) < 1e-6
        assert abs(r.coeffs[0]) < 1e-6

    @pytest.mark.parametrize(
        "name,domain", [("square", SQUARE2), ("ellipse", ELLIPSE)]
    )
    def test_norm_bounds(self, name, domain, em_square, em_ellipse):
        em = em_square if name == "square" else em_ellipse
        fs = faber(em, 10)
        fnorms = fs.norms()
        cap = em.capacity
        for n in (2, 5, 9):
            try:
                r = chebyshev(domain, em, n)
            except LawsonStall as exc:
                r = exc.best
            assert r.norm <= 2.0 * cap**n * (1 + 1e-4)
            # the minimax candidate should not exceed the Faber candidate
            assert r.norm <= cap**n * fnorms[n] * (1 + 1e-3)

    def test_history_monotone_after_burn_in(self, em_square):
        try:
            r = chebyshev(SQUARE2, em_square, 8)
        except LawsonStall as exc:
            r = exc.best
        h = r.history
        assert np.all(np.diff(h[3:]) <= 0.0)

    def test_stall_carries_best_iterate(self, em_square):
        with pytest.raises(LawsonStall) as info:
            chebyshev(SQUARE2, em_square, 5, max_iter=150)
        best = info.value.best
        assert isinstance(best, ChebyshevResult)
        assert not best.converged
        assert best.coeffs[5] == 1.0
        assert best.spread > 1e-6
        assert best.norm <= 2.0 * em_square.capacity**5 * (1 + 1e-4)

    def test_degree_validation(self):
        with pytest.raises(ValueError):
            chebyshev(SQUARE2, None, 0)


class TestSharpness:
    def test_capacity_closed_forms_agree(self):
        rng = np.random.default_rng(7)
        for delta in rng.uniform(1e-6, 1.0, size=100):
            inst = sharpness_instance(float(delta))
            alt = 0.25 * (3 + delta + 1 / (1 + delta))
            assert abs(inst.capacity - alt) <= 1e-14 * alt
        assert abs(sharpness_instance(0.5).capacity - (1 + 0.25 / 6.0)) < 1e-12

    @pytest.mark.parametrize("delta", [0.1, 0.2, 0.5])
    def test_interval_mass_and_totals(self, delta):
        inst = sharpness_instance(delta)
        assert inst.interval_mass >= delta / (3 * math.pi)
        assert abs(inst.tau.total - 1.0) < 1e-12
        assert abs(inst.mu_circle.total + inst.interval_mass - 1.0) < 1e-12
        # needle mass sits as an atom at z = 1 (s = 0)
        assert inst.tau.atoms == ((0.0, inst.interval_mass),)

    @pytest.mark.parametrize("delta", [0.1, 0.2, 0.5])
    def test_discrepancy_ratio(self, delta):
        chk = sharpness_check(sharpness_instance(delta))
        assert chk["eps"] == delta**2 / 4.0
        assert chk["ratio"] >= 2 / (3 * math.pi)
        assert chk["D"] >= delta / (3 * math.pi)

    def test_gap_bound_chain(self):
        # log capacity <= delta^2/4, the potential-gap bound behind eps
        for delta in (0.1, 0.2, 0.5, 1.0):
            inst = sharpness_instance(delta)
            assert math.log(inst.capacity) <= delta**2 / 4.0

    def test_small_delta_limit(self):
        inst = sharpness_instance(1e-3)
        chk = sharpness_check(inst)
        assert inst.capacity - 1.0 < 3e-7
        assert chk["D"] < 1e-3
        assert chk["eps"] == 2.5e-7

    def test_interval_cumulative(self):
        inst = sharpness_instance(0.3)
        x = np.linspace(1.0, 1.3, 64)
        cum = inst.interval_cumulative(x)
        assert abs(cum[0]) < 1e-12
        assert abs(cum[-1] - inst.interval_mass) < 1e-12
        assert np.all(np.diff(cum) >= 0)

    def test_circle_symmetry(self):
        # arcs conjugate-symmetric about the needle carry equal mass
        inst = sharpness_instance(0.4)
        circle_mass = 1.0 - inst.interval_mass
        half = inst.tau.cumulative_fn(np.array(math.pi))
        assert abs(half - circle_mass / 2) < 1e-12

    def test_delta_validation(self):
        with pytest.raises(ValueError):
            sharpness_instance(0.0)
        with pytest.raises(ValueError):
            sharpness_instance(1.5)

    @settings(max_examples=40, deadline=None)
    @given(delta=st.floats(min_value=1e-4, max_value=1.0))
    def test_mass_and_capacity_properties(self, delta):
        inst = sharpness_instance(delta)
        alt = 0.25 * (3 + delta + 1 / (1 + delta))
        assert abs(inst.capacity - alt) <= 1e-14 * alt
        assert delta / (3 * math.pi) <= inst.interval_mass < delta
