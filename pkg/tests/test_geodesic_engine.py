import cmath
import math
import random

import pytest

from conesys.cone_complex import (
    build_calabi_croke,
    build_flat_torus_surface,
    perturb,
    ramified_cover,
    refine,
)
from conesys.flat_lattice import FlatTorus, Lattice2D, shortest_vector
from conesys.geodesic_engine import (
    GeodesicPath,
    SearchExhausted,
    SurfacePoint,
    distance,
    geodesic_loops_at_vertex,
    min_vertex_distance,
    pointed_systole_punctured,
    project_to_sphere,
    same_point,
    shortest_path,
    trace,
)
from conesys.minkowski import Norm2D
from helpers import random_lattice_basis

SQRT3 = math.sqrt(3.0)


def torus_surface(a, b):
    return build_flat_torus_surface(Lattice2D(a, b))


def chart_to_plane_rotation(a, b, tri):
    """Unit complex mapping chart vectors of the torus builder to the plane."""
    az = complex(*a)
    bz = complex(*b)
    if (az * bz.conjugate()).imag > 0:  # det < 0 was flipped by the builder
        bz = -bz
    w = az if tri == 0 else az + bz
    return w / abs(w)


class TestTrace:
    def test_flat_torus_rational_direction_closes(self):
        a, b = (1.3, 0.0), (0.2, 1.1)
        surf = torus_surface(a, b)
        start = SurfacePoint(0, (0.8, 0.4))
        w = complex(2 * a[0] + b[0], 2 * a[1] + b[1])
        path = trace(surf, start, w / abs(w), abs(w))
        assert path.terminal == "length_exhausted"
        assert path.total_length == pytest.approx(abs(w), abs=1e-12)
        assert same_point(surf, start, path.end, tol=1e-9)

    def test_aiming_at_vertex_hits_cone_point(self):
        cc = build_calabi_croke(1.0)
        # midpoint of edge 0, aimed at the opposite corner
        start = SurfacePoint(0, (0.5, 0.0))
        apex = cc.corners(0)[2]
        u = (apex - start.z) / abs(apex - start.z)
        path = trace(cc, start, u, 5.0)
        assert path.terminal == "cone_point"
        assert path.terminal_vertex == cc.vertex_of(0, 2)
        assert path.total_length == pytest.approx(abs(apex - start.z), abs=1e-12)

    def test_straightness_against_manual_unfolding(self):
        cc = build_calabi_croke(1.0)
        start = SurfacePoint(0, (0.55, 0.18))
        u = cmath.exp(0.9j)
        path = trace(cc, start, u, 1.4)
        assert len(path.segments) >= 3

        # manual first crossing: ray from start hits edge 1 of triangle 0
        p1, p2 = complex(1.0, 0.0), complex(0.5, SQRT3 / 2.0)
        d = p2 - p1
        s = ((p1 - start.z) / u).imag / (d / u).imag * -1.0
        denom = (u.real * d.imag - u.imag * d.real)
        tt = ((p1.real - start.z.real) * d.imag - (p1.imag - start.z.imag) * d.real) / denom
        x1 = start.z + tt * u
        assert abs(path.segments[0][2] - x1) < 1e-9

        # manual unfolding of triangle 1 across that edge: corner q1 -> p2, q2 -> p1
        q1, q2 = complex(1.0, 0.0), complex(0.5, SQRT3 / 2.0)
        alpha = (p1 - p2) / (q2 - q1)
        beta = p2 - alpha * q1
        # entry point of segment 1 in triangle 1 coordinates
        entry = path.segments[1][1]
        assert abs(alpha * entry + beta - x1) < 1e-9
        # second crossing stays on the straight line through start with direction u
        exit2 = alpha * path.segments[1][2] + beta
        assert abs(((exit2 - start.z) / u).imag) < 1e-9

    def test_trace_rejects_cone_point_start(self):
        cc = build_calabi_croke(1.0)
        with pytest.raises(ValueError):
            trace(cc, SurfacePoint(0, (0.0, 0.0)), 1.0 + 0j, 1.0)


class TestDistance:
    def test_same_point_is_zero(self):
        surf = torus_surface((1.0, 0.0), (0.0, 1.0))
        p = SurfacePoint(0, (0.6, 0.3))
        assert distance(surf, p, p, 1.0) == 0.0

    def test_vertex_to_vertex_on_calabi_croke(self):
        cc = build_calabi_croke(1.0)
        x1, x2, x3 = cc.marked
        for pair in ((x1, x2), (x2, x3), (x1, x3)):
            assert distance(cc, pair[0], pair[1], 2.0) == pytest.approx(1.0, abs=1e-9)

    def test_dijkstra_on_refinements_converges_from_above(self):
        # skeleton Dijkstra upper bounds shrink toward the true distance 1
        from conesys.geodesic_engine import _skeleton_distance_upper
        values = []
        for level in range(0, 5):
            surf = refine(build_calabi_croke(1.0), level)
            x1, x2 = surf.marked[0], surf.marked[1]
            values.append(_skeleton_distance_upper(surf, ("vertex", x1), ("vertex", x2)))
        assert all(v >= 1.0 - 1e-12 for v in values)
        assert values[-1] == pytest.approx(1.0, abs=1e-9)

    def test_flat_torus_against_translate_oracle(self):
        rng = random.Random(71)
        for _ in range(20):
            a, b = random_lattice_basis(rng)
            surf = torus_surface(a, b)
            az, bz = complex(*a), complex(*b)
            if (az.conjugate() * bz).imag < 0:
                bz = -bz
            for _ in range(10):
                t1, t2 = rng.randrange(2), rng.randrange(2)
                p = _random_interior_point(surf, t1, rng)
                q = _random_interior_point(surf, t2, rng)
                rp = chart_to_plane_rotation(a, b, t1)
                rq = chart_to_plane_rotation(a, b, t2)
                pz = rp * p.z
                qz = rq * q.z
                oracle = min(abs(qz + m * az + n * bz - pz)
                             for m in range(-3, 4) for n in range(-3, 4))
                got = distance(surf, p, q, 4.0 * (abs(az) + abs(bz)))
                assert got == pytest.approx(oracle, abs=1e-9)

    def test_symmetry_and_triangle_inequality(self):
        rng = random.Random(73)
        surf = refine(build_calabi_croke(1.0), 1)
        pts = [_random_interior_point(surf, rng.randrange(surf.n_triangles), rng)
               for _ in range(6)]
        d = {}
        for i in range(len(pts)):
            for j in range(len(pts)):
                if i != j:
                    d[(i, j)] = distance(surf, pts[i], pts[j], 3.0)
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                assert d[(i, j)] == pytest.approx(d[(j, i)], abs=1e-9)
        for i in range(len(pts)):
            for j in range(len(pts)):
                for k in range(len(pts)):
                    if len({i, j, k}) == 3:
                        assert d[(i, k)] <= d[(i, j)] + d[(j, k)] + 1e-9

    def test_bound_respected(self):
        cc = build_calabi_croke(1.0)
        x1, x2 = cc.marked[0], cc.marked[1]
        assert distance(cc, x1, x2, 0.5) is None

    def test_shortest_path_witness_chains(self):
        surf = torus_surface((1.0, 0.0), (0.0, 1.0))
        p = SurfacePoint(0, (0.9, 0.05))
        q = SurfacePoint(0, (0.1, 0.05))
        path = shortest_path(surf, p, q, 2.0)
        # wraps around through the gluing rather than across the square
        assert path.total_length == pytest.approx(0.2, abs=1e-9)
        assert len(path.segments) >= 2


class TestMinVertexDistance:
    def test_calabi_croke_side_one(self):
        assert min_vertex_distance(build_calabi_croke(1.0)) == pytest.approx(1.0, abs=1e-9)

    def test_scales_with_side(self):
        assert min_vertex_distance(build_calabi_croke(2.5)) == pytest.approx(2.5, abs=1e-9)

    def test_perturbed_within_lipschitz_window(self):
        base = refine(build_calabi_croke(1.0), 2)
        for seed in (1, 7, 23):
            p = perturb(base, seed, 0.05)
            d = min_vertex_distance(p)
            assert 0.9 <= d <= 1.1


class TestVertexLoops:
    def test_equilateral_torus_loops(self):
        surf = build_flat_torus_surface(Lattice2D.hexagonal(SQRT3))
        loops = geodesic_loops_at_vertex(surf, 0, budget=1.01 * SQRT3)
        assert loops
        assert loops[0].total_length == pytest.approx(SQRT3, abs=1e-9)
        res = shortest_vector(FlatTorus(Lattice2D.hexagonal(SQRT3), Norm2D.euclidean()))
        assert loops[0].total_length == pytest.approx(res.length, abs=1e-9)
        shortest = [l for l in loops if l.total_length < SQRT3 * 1.0001]
        assert len(shortest) >= 3  # three systolic classes through any point


class TestPointedSystole:
    def test_calabi_croke_value_and_bracket(self):
        cover = ramified_cover(build_calabi_croke(1.0))
        for i in range(3):
            value, loop = pointed_systole_punctured(cover, i)
            assert value == pytest.approx(SQRT3, abs=1e-9)
            assert SQRT3 - 1e-9 <= value < 2.0
            assert loop.closed
            proj = project_to_sphere(cover, loop)
            assert proj.total_length == pytest.approx(value, abs=1e-12)

    def test_scaled_sphere_scales_linearly(self):
        cover = ramified_cover(build_calabi_croke(2.0))
        value, _ = pointed_systole_punctured(cover, 0)
        assert value == pytest.approx(2.0 * SQRT3, abs=1e-9)

    def test_lift_inequality_sys_below_pointed(self):
        # sys(T^2) <= pointed punctured systole for each basepoint
        cover = ramified_cover(build_calabi_croke(1.0))
        for i in range(3):
            value, _ = pointed_systole_punctured(cover, i)
            assert SQRT3 <= value + 1e-9


def _random_interior_point(surf, tri, rng) -> SurfacePoint:
    c0, c1, c2 = surf.corners(tri)
    w = sorted([rng.uniform(0.08, 0.92) for _ in range(2)])
    u, v = w[0], w[1] - w[0]
    z = c0 * u + c1 * v + c2 * (1 - w[1])
    return SurfacePoint.of(tri, z)
