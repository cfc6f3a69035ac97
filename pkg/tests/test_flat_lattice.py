import math
import random

import numpy as np
import pytest

from conesys.flat_lattice import (
    FlatTorus,
    Lattice2D,
    LatticeError,
    is_hexagonal,
    lagrange_reduce,
    loewner_report,
    shortest_vector,
    torus_area,
)
from conesys.minkowski import Norm2D, calabi_croke_norm, eval_norm, square_norm
from helpers import random_lattice_basis, random_norm

SQRT3 = math.sqrt(3.0)


def brute_force_shortest(torus: FlatTorus, coeff_bound: int) -> float:
    best = math.inf
    for m in range(-coeff_bound, coeff_bound + 1):
        for n in range(-coeff_bound, coeff_bound + 1):
            if m == 0 and n == 0:
                continue
            best = min(best, eval_norm(torus.norm, torus.lattice.vector(m, n)))
    return best


class TestShortestVector:
    def test_equilateral_euclidean(self):
        lat = Lattice2D((SQRT3, 0.0), (SQRT3 / 2.0, 1.5))
        torus = FlatTorus(lat, Norm2D.euclidean())
        res = shortest_vector(torus)
        assert res.length == pytest.approx(SQRT3, abs=1e-12)
        assert res.length == pytest.approx(brute_force_shortest(torus, 4), abs=1e-12)

    def test_calabi_croke_norm_on_hexagonal_lattice(self):
        torus = FlatTorus(Lattice2D.hexagonal(1.0), calabi_croke_norm())
        res = shortest_vector(torus)
        # closed form ||m a + n b|| = 2(|m| + |n|)
        assert res.length == pytest.approx(2.0, abs=1e-12)
        assert res.coeffs == (1, 0)
        assert res.length == pytest.approx(brute_force_shortest(torus, 4), abs=1e-12)

    def test_two_z2_with_square_norm(self):
        torus = FlatTorus(Lattice2D((2.0, 0.0), (0.0, 2.0)), square_norm())
        res = shortest_vector(torus)
        assert res.length == pytest.approx(2.0, abs=1e-12)
        assert res.coeffs == (1, 0)
        assert res.vector == pytest.approx((2.0, 0.0))

    def test_oracle_equivalence_on_random_pairs(self):
        rng = random.Random(101)
        for _ in range(500):
            a, b = random_lattice_basis(rng)
            torus = FlatTorus(Lattice2D(a, b), random_norm(rng))
            res = shortest_vector(torus)
            assert res.length == pytest.approx(
                brute_force_shortest(torus, 25), rel=1e-9, abs=1e-12)

    def test_result_invariants(self):
        rng = random.Random(103)
        for _ in range(50):
            a, b = random_lattice_basis(rng)
            torus = FlatTorus(Lattice2D(a, b), random_norm(rng))
            res = shortest_vector(torus)
            m, n = res.coeffs
            assert (m, n) != (0, 0)
            assert m > 0 or (m == 0 and n > 0)
            vec = torus.lattice.vector(m, n)
            assert np.allclose(vec, res.vector)
            assert res.length == pytest.approx(eval_norm(torus.norm, vec), abs=1e-12)


class TestTorusArea:
    def test_equilateral_side_sqrt3_euclidean(self):
        torus = FlatTorus(Lattice2D.hexagonal(SQRT3), Norm2D.euclidean())
        # equals 3 x area of the unit-side doubled-triangle sphere
        assert torus_area(torus) == pytest.approx(3.0 * SQRT3 / 2.0, abs=1e-12)
        assert torus_area(torus, "BusemannHausdorff") == pytest.approx(
            3.0 * SQRT3 / 2.0, abs=1e-12)

    def test_square_norm_equality_family(self):
        torus = FlatTorus(Lattice2D((2.0, 0.0), (0.0, 2.0)), square_norm())
        assert torus_area(torus, "HolmesThompson") == pytest.approx(8.0 / math.pi, abs=1e-12)

    def test_finsler_calabi_croke_torus(self):
        torus = FlatTorus(Lattice2D.hexagonal(1.0), calabi_croke_norm())
        assert torus_area(torus, "HolmesThompson") == pytest.approx(16.0 / math.pi, abs=1e-9)

    def test_unknown_convention_rejected(self):
        torus = FlatTorus(Lattice2D.hexagonal(1.0), Norm2D.euclidean())
        with pytest.raises(ValueError):
            torus_area(torus, "Lebesgue")


class TestLoewnerReport:
    def test_equilateral_equality(self):
        rep = loewner_report(FlatTorus(Lattice2D.hexagonal(SQRT3), Norm2D.euclidean()))
        assert rep["ratio"] == pytest.approx(SQRT3 / 2.0, abs=1e-9)
        assert rep["bound"] == pytest.approx(SQRT3 / 2.0)
        assert rep["verdict"] and rep["equality"]

    def test_square_norm_equality(self):
        rep = loewner_report(FlatTorus(Lattice2D((2.0, 0.0), (0.0, 2.0)), square_norm()))
        assert rep["ratio"] == pytest.approx(2.0 / math.pi, abs=1e-9)
        assert rep["verdict"] and rep["equality"]

    def test_finsler_calabi_croke_strict(self):
        rep = loewner_report(FlatTorus(Lattice2D.hexagonal(1.0), calabi_croke_norm()))
        assert rep["ratio"] == pytest.approx(4.0 / math.pi, abs=1e-9)
        assert rep["verdict"] and not rep["equality"]

    def test_scale_equivariance(self):
        rng = random.Random(107)
        for _ in range(40):
            a, b = random_lattice_basis(rng)
            norm = random_norm(rng)
            t = rng.uniform(0.2, 5.0)
            rep1 = loewner_report(FlatTorus(Lattice2D(a, b), norm))
            rep2 = loewner_report(FlatTorus(
                Lattice2D((t * a[0], t * a[1]), (t * b[0], t * b[1])), norm))
            assert rep2["sys"] == pytest.approx(t * rep1["sys"], rel=1e-9)
            assert rep2["area_ht"] == pytest.approx(t * t * rep1["area_ht"], rel=1e-9)
            assert rep2["ratio"] == pytest.approx(rep1["ratio"], abs=1e-9)

    def test_unimodular_invariance(self):
        rng = random.Random(109)
        for _ in range(40):
            a, b = random_lattice_basis(rng)
            norm = random_norm(rng)
            p, q = rng.choice([(1, 0), (1, 1), (2, 1), (0, 1), (1, 2), (3, 2)])
            # complete (p, q) to a unimodular matrix
            r, s = {(1, 0): (0, 1), (1, 1): (0, 1), (2, 1): (1, 1), (0, 1): (-1, 0),
                    (1, 2): (1, 3), (3, 2): (1, 1)}[(p, q)]
            assert p * s - q * r in (1, -1)
            lat1 = Lattice2D(a, b)
            a2 = tuple(lat1.vector(p, q))
            b2 = tuple(lat1.vector(r, s))
            rep1 = loewner_report(FlatTorus(lat1, norm))
            rep2 = loewner_report(FlatTorus(Lattice2D(a2, b2), norm))
            assert rep2["sys"] == pytest.approx(rep1["sys"], abs=1e-12)
            assert rep2["area_ht"] == pytest.approx(rep1["area_ht"], rel=1e-12)

    def test_bounds_hold_on_random_tori(self):
        rng = random.Random(113)
        for _ in range(1000):
            a, b = random_lattice_basis(rng)
            rep = loewner_report(FlatTorus(Lattice2D(a, b), random_norm(rng)))
            assert rep["ratio"] >= rep["bound"] - 1e-9


class TestLatticeUtilities:
    def test_degenerate_basis_rejected(self):
        with pytest.raises(LatticeError):
            Lattice2D((1.0, 2.0), (2.0, 4.0))

    def test_lagrange_reduction_finds_hexagonal(self):
        lat = Lattice2D.hexagonal(SQRT3)
        skewed = Lattice2D(tuple(lat.vector(5, 3)), tuple(lat.vector(3, 2)))
        assert is_hexagonal(skewed)
        red = lagrange_reduce(skewed)
        assert np.hypot(*red.basis_a) == pytest.approx(SQRT3, abs=1e-9)

    def test_square_lattice_is_not_hexagonal(self):
        assert not is_hexagonal(Lattice2D((1.0, 0.0), (0.0, 1.0)))

    def test_json_roundtrip(self):
        torus = FlatTorus(Lattice2D.hexagonal(2.0), square_norm(0.5))
        back = FlatTorus.from_json(torus.to_json())
        assert back.lattice == torus.lattice
        assert np.allclose(back.norm.vertices, torus.norm.vertices)
