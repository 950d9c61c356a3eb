"""Orthonormal polynomial construction against closed forms and invariants."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convexortho.conformal import capacity
from convexortho.geometry import Disk, Ellipse, Polygon, regular_polygon
from convexortho.orthopoly import (
    BreakdownAtDegree,
    OrthoSequence,
    QuadratureBudgetExceeded,
    Weight,
    build_engine,
    eval_basis,
    eval_poly,
    leading_product,
    orthonormalize,
    sup_norm,
)

SQUARE2 = Polygon((1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j))
HEXAGON = regular_polygon(6)
ELLIPSE = Ellipse(0.0, 2.0, 1.0, 0.0)


@pytest.fixture(scope="module")
def disk_seq():
    return orthonormalize(build_engine(Disk(0.0, 1.0), n_max=30), 30)


@pytest.fixture(scope="module")
def square_engine():
    return build_engine(SQUARE2, n_max=40)


@pytest.fixture(scope="module")
def square_seq(square_engine):
    return orthonormalize(square_engine, 40)


def disk_lambda(n):
    return math.sqrt((n + 1) / math.pi)


class TestEngine:
    @pytest.mark.parametrize(
        "domain",
        [SQUARE2, HEXAGON, ELLIPSE, Disk(1 + 1j, 0.75)],
        ids=["square", "hexagon", "ellipse", "disk"],
    )
    def test_positive_weights_and_area(self, domain):
        eng = build_engine(domain, n_max=12)
        assert (eng.base_weights > 0).all()
        assert abs(eng.base_weights.sum() - domain.area) <= 1e-12 * domain.area

    def test_square_moments(self, square_engine):
        one = np.ones(square_engine.node_count)
        z = square_engine.nodes
        assert square_engine.inner(one, one) == pytest.approx(4.0, rel=1e-13)
        assert abs(square_engine.inner(z, one)) <= 1e-13
        assert square_engine.inner(z, z) == pytest.approx(8.0 / 3.0, rel=1e-12)

    def test_weighted_engine_mass(self):
        # integral of dist(z, L) over the square [-1,1]^2: 4 pyramids -> 4/3
        eng = build_engine(SQUARE2, Weight("dist-power", 1.0), n_max=10)
        assert eng.weights.sum() == pytest.approx(4.0 / 3.0, rel=1e-12)

    def test_budget_exceeded(self):
        with pytest.raises(QuadratureBudgetExceeded):
            build_engine(SQUARE2, Weight("dist-power", 1.0), n_max=40, node_budget=1000)

    def test_apex_must_be_interior(self):
        with pytest.raises(ValueError, match="apex"):
            build_engine(SQUARE2, n_max=5, apex=3.0 + 0j)

    def test_weight_validation(self):
        with pytest.raises(ValueError):
            Weight("exp")
        with pytest.raises(ValueError):
            Weight("dist-power", -1.0)
        with pytest.raises(ValueError):
            Weight("dist-power", 1.0, c=0.0)
        with pytest.raises(NotImplementedError):
            build_engine(Disk(0.0, 1.0), Weight("dist-power", 0.5), n_max=5)


class TestDiskClosedForm:
    def test_lambda(self, disk_seq):
        lam_exact = np.array([disk_lambda(n) for n in range(31)])
        assert np.max(np.abs(disk_seq.lam / lam_exact - 1)) <= 1e-9

    def test_q0_constant(self, disk_seq):
        assert eval_poly(disk_seq, 0, 0.3 + 0.1j) == pytest.approx(1 / math.sqrt(math.pi))

    def test_q5_at_one(self, disk_seq):
        assert eval_poly(disk_seq, 5, 1.0) == pytest.approx(math.sqrt(6 / math.pi))

    def test_eval_matches_monomial_form(self, disk_seq):
        zs = np.array([0.9, -0.4 + 0.6j, 0.1j, -1.0])
        for n in (1, 7, 19, 30):
            exact = disk_lambda(n) * zs**n
            got = eval_poly(disk_seq, n, zs)
            assert np.max(np.abs(got - exact)) <= 1e-9

    def test_hessenberg_structure(self, disk_seq):
        h = disk_seq.hessenberg
        for k in range(30):
            assert h[k + 1, k].real == pytest.approx(math.sqrt((k + 1) / (k + 2)), abs=1e-12)
            assert np.max(np.abs(h[: k + 1, k])) <= 1e-12

    def test_scaled_shifted_disk(self):
        seq = orthonormalize(build_engine(Disk(1 + 2j, 0.5), n_max=12), 12)
        lam_exact = np.array([disk_lambda(n) / 0.5 ** (n + 1) for n in range(13)])
        assert np.max(np.abs(seq.lam / lam_exact - 1)) <= 1e-9

    def test_sup_norm(self, disk_seq):
        for n in (3, 12, 25):
            assert sup_norm(disk_seq, n) == pytest.approx(disk_lambda(n), rel=1e-6)


class TestOrthonormality:
    @pytest.mark.parametrize("domain", [SQUARE2, HEXAGON, ELLIPSE], ids=["square", "hexagon", "ellipse"])
    def test_gram_residual_unit(self, domain):
        seq = orthonormalize(build_engine(domain, n_max=40), 40)
        assert seq.gram_residual <= 1e-8

    def test_gram_residual_independent_quadrature(self, square_seq):
        # different fan apex and a finer degree: nodes share nothing with the
        # engine that built the sequence
        eng = build_engine(SQUARE2, n_max=40, apex=0.17 + 0.11j, degree_margin=8)
        v = eval_basis(square_seq, 40, eng.nodes)
        gram = (v * eng.weights) @ v.conj().T
        assert np.max(np.abs(gram - np.eye(41))) <= 1e-8

    def test_weighted_gram_residual(self):
        eng = build_engine(SQUARE2, Weight("dist-power", 1.0), n_max=40)
        seq = orthonormalize(eng, 40)
        assert seq.gram_residual <= 1e-7
        fine = build_engine(SQUARE2, Weight("dist-power", 1.0), n_max=40, degree_margin=6)
        v = eval_basis(seq, 40, fine.nodes)
        gram = (v * fine.weights) @ v.conj().T
        assert np.max(np.abs(gram - np.eye(41))) <= 1e-7

    def test_breakdown_on_exhausted_engine(self):
        eng = build_engine(Disk(0.0, 1.0), n_max=0)
        # 12 nodes support exactly 12 independent functions; the 12th-degree
        # residual must vanish
        with pytest.raises(BreakdownAtDegree) as exc:
            orthonormalize(eng, eng.node_count + 2)
        assert exc.value.degree == eng.node_count


class TestCovariance:
    def test_scaling(self, square_seq):
        big = Polygon(tuple(2 * v for v in SQUARE2.vertices))
        seq2 = orthonormalize(build_engine(big, n_max=40), 40)
        n = np.arange(41)
        assert np.max(np.abs(seq2.lam * 2.0 ** (n + 1) / square_seq.lam - 1)) <= 1e-8

    def test_rotation_leaves_lambda(self):
        rot = regular_polygon(6, phase=0.3)
        seq_a = orthonormalize(build_engine(HEXAGON, n_max=20), 20)
        seq_b = orthonormalize(build_engine(rot, n_max=20), 20)
        assert np.max(np.abs(seq_b.lam / seq_a.lam - 1)) <= 1e-8


class TestCoefficients:
    def test_square_mod4_sparsity(self, square_seq):
        for n in range(3, 13):
            coeffs = square_seq.monomial_coeffs(n)
            allowed = np.zeros(n + 1, dtype=bool)
            allowed[n::-4] = True
            off = np.max(np.abs(coeffs[~allowed])) if (~allowed).any() else 0.0
            assert off <= 1e-10 * np.max(np.abs(coeffs))

    def test_monomial_vs_hessenberg_eval(self, square_seq):
        rng = np.random.default_rng(7)
        zs = rng.uniform(-1, 1, 20) + 1j * rng.uniform(-1, 1, 20)
        for n in (5, 10, 15):
            mono = np.polyval(square_seq.monomial_coeffs(n)[::-1], zs)
            hess = eval_poly(square_seq, n, zs)
            assert np.max(np.abs(mono - hess)) <= 1e-9 * np.max(np.abs(hess))

    def test_leading_coeff_matches_lambda(self, square_seq):
        for n in (4, 9):
            coeffs = square_seq.monomial_coeffs(n)
            assert abs(coeffs[n]) == pytest.approx(square_seq.lam[n], rel=1e-10)


class TestLeadingProduct:
    def test_log_space_matches_direct(self, square_seq):
        cap = capacity(SQUARE2)
        for n in (0, 5, 23, 40):
            direct = square_seq.lam[n] * cap**n
            assert leading_product(square_seq, n, cap) == pytest.approx(direct, rel=1e-12)

    def test_square_growth_bound(self, square_seq):
        cap = capacity(SQUARE2)
        vals = [n * n * leading_product(square_seq, n, cap) for n in range(2, 41)]
        assert min(vals) > 0

    def test_sup_norm_square_peaks_at_corner(self, square_seq):
        for n in (8, 16):
            peak = sup_norm(square_seq, n)
            corner = max(abs(eval_poly(square_seq, n, v)) for v in SQUARE2.vertices)
            assert peak >= corner - 1e-12
            assert peak <= corner * (1 + 1e-6) or peak >= corner


class TestSerialization:
    def test_round_trip_exact(self, square_seq):
        data = json.loads(json.dumps(square_seq.to_dict()))
        back = OrthoSequence.from_dict(data)
        assert np.array_equal(back.hessenberg, square_seq.hessenberg)
        assert np.array_equal(back.lam, square_seq.lam)
        zs = np.array([0.3 + 0.2j, -0.9 + 0.9j])
        assert np.array_equal(eval_basis(back, 40, zs), eval_basis(square_seq, 40, zs))

    def test_hash_guard(self, square_seq):
        data = square_seq.to_dict()
        data["domain_hash"] = "0" * 64
        with pytest.raises(ValueError, match="hash"):
            OrthoSequence.from_dict(data)

    def test_weight_round_trip(self):
        w = Weight("dist-power", 2.0, 1.0)
        assert Weight.from_dict(w.to_dict()) == w
        assert Weight.from_dict(Weight().to_dict()) == Weight()


class TestDeterminism:
    def test_bitwise_repeatable(self):
        a = orthonormalize(build_engine(HEXAGON, n_max=15), 15)
        b = orthonormalize(build_engine(HEXAGON, n_max=15), 15)
        assert np.array_equal(a.hessenberg, b.hessenberg)
        assert np.array_equal(a.lam, b.lam)


def test_eval_poly_shapes(square_seq):
    assert isinstance(eval_poly(square_seq, 3, 0.1 + 0.2j), complex)
    out = eval_poly(square_seq, 3, np.zeros((2, 5), dtype=complex))
    assert out.shape == (2, 5)


@st.composite
def cyclic_polygons(draw):
    n = draw(st.integers(min_value=3, max_value=6))
    gaps = draw(
        st.lists(st.floats(0.5, 1.0), min_size=n, max_size=n).filter(
            lambda g: sum(g) > 0
        )
    )
    radius = draw(st.floats(0.5, 2.0))
    angles = 2 * math.pi * np.cumsum(gaps) / sum(gaps)
    return Polygon(tuple(radius * np.exp(1j * angles)))


@settings(max_examples=5, deadline=None)
@given(cyclic_polygons())
def test_gram_residual_random_polygons(poly):
    seq = orthonormalize(build_engine(poly, n_max=8), 8)
    assert seq.gram_residual <= 1e-10
    assert (seq.lam > 0).all()
