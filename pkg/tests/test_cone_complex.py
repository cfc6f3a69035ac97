import math

import numpy as np
import pytest

from conesys.cone_complex import (
    ConeSurface,
    SurfaceError,
    build_calabi_croke,
    build_flat_torus_surface,
    deck_invariance_check,
    holonomy_lattice,
    perturb,
    ramified_cover,
    refine,
    universal_cover_piece,
)
from conesys.flat_lattice import (
    FlatTorus,
    Lattice2D,
    is_hexagonal,
    shortest_vector,
    torus_area,
)
from conesys.minkowski import Norm2D, calabi_croke_norm, square_norm
from conesys import serialize

SQRT3 = math.sqrt(3.0)
TWO_PI = 2.0 * math.pi


class TestCalabiCroke:
    def test_side_one_area_and_angles(self):
        cc = build_calabi_croke(1.0)
        assert cc.area_euclidean() == pytest.approx(SQRT3 / 2.0, abs=1e-12)
        assert cc.euler_characteristic() == 2
        assert len(cc.marked) == 3
        for v in cc.marked:
            assert cc.cone_angle(v) == pytest.approx(TWO_PI / 3.0, abs=1e-12)

    def test_scaling(self):
        cc2 = build_calabi_croke(2.0)
        assert cc2.area_euclidean() == pytest.approx(2.0 * SQRT3, abs=1e-12)
        for v in cc2.marked:
            assert cc2.cone_angle(v) == pytest.approx(TWO_PI / 3.0, abs=1e-12)

    def test_rejects_nonpositive_side(self):
        with pytest.raises(SurfaceError):
            build_calabi_croke(0.0)

    def test_gauss_bonnet(self):
        cc = refine(build_calabi_croke(1.0), 2)
        defect = sum(TWO_PI - cc.cone_angle(v) for v in range(cc.n_vertices))
        assert defect == pytest.approx(4.0 * math.pi, abs=1e-9)


class TestFlatTorusSurface:
    def test_hexagonal_lattice_surface(self):
        surf = build_flat_torus_surface(Lattice2D.hexagonal(1.0))
        assert surf.euler_characteristic() == 0
        assert surf.n_vertices == 1
        assert surf.cone_angle(0) == pytest.approx(TWO_PI, abs=1e-12)
        assert surf.area_euclidean() == pytest.approx(SQRT3 / 2.0, abs=1e-12)

    def test_finsler_area_matches_lattice_computation(self):
        lat = Lattice2D((2.0, 0.0), (0.0, 2.0))
        surf = build_flat_torus_surface(lat, square_norm())
        want = torus_area(FlatTorus(lat, square_norm()), "HolmesThompson")
        assert surf.area("HolmesThompson") == pytest.approx(want, abs=1e-12)
        assert want == pytest.approx(8.0 / math.pi, abs=1e-12)

    def test_negative_orientation_basis_is_fixed_up(self):
        surf = build_flat_torus_surface(Lattice2D((1.0, 0.0), (0.3, -1.2)))
        assert surf.area_euclidean() == pytest.approx(1.2, abs=1e-12)


class TestRefine:
    def test_counts_and_area(self):
        cc = build_calabi_croke(1.0)
        r1 = refine(cc, 1)
        assert r1.n_triangles == 8
        assert r1.area_euclidean() == pytest.approx(SQRT3 / 2.0, abs=1e-12)
        assert refine(cc, 0) is cc

    def test_cone_angles_preserved(self):
        cc = build_calabi_croke(1.0)
        r2 = refine(cc, 2)
        assert r2.n_triangles == 32
        marked_angles = sorted(r2.cone_angle(v) for v in r2.marked)
        assert marked_angles == pytest.approx([TWO_PI / 3.0] * 3, abs=1e-12)
        for v in range(r2.n_vertices):
            if v not in r2.marked:
                assert r2.cone_angle(v) == pytest.approx(TWO_PI, abs=1e-12)

    def test_refines_norm_field_consistently(self):
        lat = Lattice2D.hexagonal(1.0)
        surf = build_flat_torus_surface(lat, calabi_croke_norm())
        fine = refine(surf, 2)
        assert fine.area("HolmesThompson") == pytest.approx(
            surf.area("HolmesThompson"), rel=1e-12)
        assert fine.area("BusemannHausdorff") == pytest.approx(
            surf.area("BusemannHausdorff"), rel=1e-12)


class TestPerturb:
    def test_magnitude_zero_is_identity(self):
        base = refine(build_calabi_croke(1.0), 1)
        assert perturb(base, seed=3, magnitude=0.0) is base

    def test_requires_refinement(self):
        with pytest.raises(SurfaceError):
            perturb(build_calabi_croke(1.0), seed=1, magnitude=0.05)

    def test_rejects_magnitude_out_of_range(self):
        base = refine(build_calabi_croke(1.0), 1)
        with pytest.raises(SurfaceError):
            perturb(base, seed=1, magnitude=0.3)

    def test_deterministic(self):
        base = refine(build_calabi_croke(1.0), 2)
        p1 = perturb(base, seed=7, magnitude=0.05)
        p2 = perturb(base, seed=7, magnitude=0.05)
        assert p1.same_geometry(p2)
        p3 = perturb(base, seed=8, magnitude=0.05)
        assert not p1.same_geometry(p3)

    def test_actually_changes_lengths(self):
        base = refine(build_calabi_croke(1.0), 2)
        p = perturb(base, seed=7, magnitude=0.05)
        diffs = sum(1 for a, b in zip(base.lengths, p.lengths) if a != b)
        assert diffs > 0

    def test_preserves_marked_angles_exactly(self):
        base = refine(build_calabi_croke(1.0), 2)
        p = perturb(base, seed=7, magnitude=0.05, preserve_marked_angles=True)
        for v in p.marked:
            assert p.cone_angle(v) == pytest.approx(TWO_PI / 3.0, abs=1e-12)

    def test_unpreserved_angles_move(self):
        base = refine(build_calabi_croke(1.0), 2)
        p = perturb(base, seed=3, magnitude=0.08, preserve_marked_angles=False)
        moved = max(abs(p.cone_angle(v) - TWO_PI / 3.0) for v in p.marked)
        assert moved > 1e-6

    def test_factor_bounds(self):
        base = refine(build_calabi_croke(1.0), 2)
        p = perturb(base, seed=11, magnitude=0.05)
        for (a0, b0, c0), (a1, b1, c1) in zip(base.lengths, p.lengths):
            for old, new in ((a0, a1), (b0, b1), (c0, c1)):
                assert 0.95 - 1e-12 <= new / old <= 1.05 + 1e-12


class TestRamifiedCover:
    def test_cc_cover_is_flat_equilateral_torus(self):
        cc = build_calabi_croke(1.0)
        cover = ramified_cover(cc)
        torus = cover.torus
        assert torus.euler_characteristic() == 0
        assert torus.area_euclidean() == pytest.approx(3.0 * SQRT3 / 2.0, abs=1e-9)
        assert torus.is_flat()
        lat = holonomy_lattice(torus)
        assert lat is not None
        assert is_hexagonal(lat, tol=1e-9)
        res = shortest_vector(FlatTorus(lat, Norm2D.euclidean()))
        assert res.length == pytest.approx(SQRT3, abs=1e-9)

    def test_deck_transformation_properties(self):
        cover = ramified_cover(refine(build_calabi_croke(1.0), 1))
        f = cover.n_sphere_triangles
        # rho^3 = id as a triangle permutation, and pi o rho = pi
        for tri in range(cover.torus.n_triangles):
            t1 = cover.deck_triangle(tri)
            assert cover.project_triangle(t1) == cover.project_triangle(tri)
            assert cover.deck_triangle(cover.deck_triangle(t1)) == tri
        perm = cover.deck_vertex_permutation()
        assert sorted(cover.deck_fixed_vertices()) == sorted(cover.ramification_vertices)
        # rho^3 fixes every vertex
        for v in range(cover.torus.n_vertices):
            w = perm[perm[perm[v]]]
            assert w == v

    def test_deck_preserves_edge_lengths(self):
        cover = ramified_cover(perturb(refine(build_calabi_croke(1.0), 2), 5, 0.05))
        torus = cover.torus
        for tri in range(torus.n_triangles):
            assert torus.lengths[cover.deck_triangle(tri)] == torus.lengths[tri]

    def test_area_factor_three_both_conventions(self):
        sphere = perturb(refine(build_calabi_croke(1.0), 2), 9, 0.05)
        cover = ramified_cover(sphere)
        assert cover.torus.area_euclidean() == pytest.approx(
            3.0 * sphere.area_euclidean(), rel=1e-9)
        assert cover.torus.area("HolmesThompson") == pytest.approx(
            3.0 * sphere.area("HolmesThompson"), rel=1e-9)
        assert cover.torus.area("BusemannHausdorff") == pytest.approx(
            3.0 * sphere.area("BusemannHausdorff"), rel=1e-9)

    def test_ramification_angles_triple(self):
        sphere = perturb(refine(build_calabi_croke(1.0), 2), 13, 0.04,
                         preserve_marked_angles=False)
        cover = ramified_cover(sphere)
        for i, xi in enumerate(sphere.marked):
            yi = cover.ramification_vertices[i]
            assert cover.torus.cone_angle(yi) == pytest.approx(
                3.0 * sphere.cone_angle(xi), abs=1e-9)

    def test_preserving_perturbation_gives_smooth_ramification(self):
        sphere = perturb(refine(build_calabi_croke(1.0), 2), 7, 0.05)
        cover = ramified_cover(sphere)
        for yi in cover.ramification_vertices:
            assert cover.torus.cone_angle(yi) == pytest.approx(TWO_PI, abs=1e-12)

    def test_requires_three_marked(self):
        torus = build_flat_torus_surface(Lattice2D.hexagonal(1.0))
        with pytest.raises(SurfaceError):
            ramified_cover(torus)


class TestUniversalCoverPiece:
    def test_piece_is_simply_connected_disk(self):
        cover = ramified_cover(build_calabi_croke(1.0))
        piece = universal_cover_piece(cover.torus, radius=3.0, cocycle=cover.cocycle)
        surf = piece.piece
        assert surf.euler_characteristic() == 1  # disk
        assert len(surf.boundary_edges()) > 0
        assert surf.n_triangles > cover.torus.n_triangles

    def test_placements_respect_gluings(self):
        cover = ramified_cover(refine(build_calabi_croke(1.0), 1))
        piece = universal_cover_piece(cover.torus, radius=2.0, cocycle=cover.cocycle)
        surf = piece.piece
        for (t, e), (t2, e2) in surf.gluing.items():
            a0, a1 = surf.edge_endpoints(t, e)
            b0, b1 = surf.edge_endpoints(t2, e2)
            pa = piece.placements[t]
            pb = piece.placements[t2]
            assert abs(pa(a0) - pb(b1)) < 1e-9
            assert abs(pa(a1) - pb(b0)) < 1e-9

    def test_flat_piece_tiles_the_plane(self):
        surf = build_flat_torus_surface(Lattice2D((1.0, 0.0), (0.0, 1.0)))
        piece = universal_cover_piece(surf, radius=2.5)
        # unit square lattice: the developed triangles have area 1/2 each and tile
        total = piece.piece.area_euclidean()
        assert total > 2.5 ** 2 * math.pi * 0.5  # decently fills the radius-2.5 disk


class TestSerialization:
    def test_surface_roundtrip(self):
        sphere = perturb(refine(build_calabi_croke(1.0), 1), 2, 0.03)
        text = serialize.dumps(sphere.to_json())
        back = ConeSurface.from_json(serialize.loads(text))
        assert back.lengths == sphere.lengths
        assert back.gluing == sphere.gluing
        assert back.marked == sphere.marked
        assert serialize.dumps(back.to_json()) == text

    def test_norm_field_roundtrip(self):
        surf = build_flat_torus_surface(Lattice2D.hexagonal(1.0), calabi_croke_norm())
        back = ConeSurface.from_json(serialize.loads(serialize.dumps(surf.to_json())))
        assert back.area("HolmesThompson") == pytest.approx(
            surf.area("HolmesThompson"), rel=1e-15)

    def test_rejects_bad_orientation_flag(self):
        obj = build_calabi_croke(1.0).to_json()
        obj["gluings"][0][4] = 1
        with pytest.raises(SurfaceError):
            ConeSurface.from_json(obj)

    def test_rejects_length_mismatch(self):
        with pytest.raises(SurfaceError):
            ConeSurface([(1.0, 1.0, 1.0), (1.0, 1.0, 1.0001)],
                        {(0, 0): (1, 2), (0, 1): (1, 1), (0, 2): (1, 0)})


class TestDeckInvariance:
    def test_calabi_croke_norm_is_not_invariant(self):
        res = deck_invariance_check(calabi_croke_norm())
        assert res["invariant"] is False
        # the rotation sends the unit vertex a/2 to a vector of norm 2
        assert res["max_deviation"] == pytest.approx(1.0, abs=1e-9)

    def test_euclidean_is_invariant(self):
        res = deck_invariance_check(Norm2D.euclidean())
        assert res["invariant"] is True
        assert res["max_deviation"] == pytest.approx(0.0, abs=1e-12)

    def test_hexagon_norm_is_invariant(self):
        hexa = Norm2D.polygon([(math.cos(k * math.pi / 3), math.sin(k * math.pi / 3))
                               for k in range(6)])
        assert deck_invariance_check(hexa)["invariant"] is True
