"""Birkhoff curve shortening and the sweepout constructions.

A marked loop is a cyclic chain of surface points joined by shortest
geodesic arcs.  One shortening round replaces the arcs between arc
midpoints by shortest geodesics and then repeats with marks and
midpoints swapped; lengths never increase and the iteration ends at a
point curve or a closed geodesic.

The sweepouts shrink the lifted domain boundaries on the cover torus:
the preimage of a disk cut off by a based loop at a marked vertex (or by
one lobe of a figure-eight) is an embedded disk bounded by the three
deck images of the lifted loop, and Birkhoff shortening with
deck-symmetric marks slides that boundary to a point.  Projecting a
fundamental third of each intermediate loop yields the sphere families
whose largest mass realizes the diastole upper bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .cone_complex import ConeSurface, CoverMap, holonomy_lattice
from .flat_lattice import FlatTorus, Lattice2D, shortest_vector
from .geodesic_engine import (
    GeodesicPath,
    SearchExhausted,
    SurfacePoint,
    _seg_length,
    _self_crossings,
    classify_systolic_projection,
    concatenate_paths,
    project_to_sphere,
    shortest_path,
    trace,
)
from .minkowski import Norm2D
from .planar import Isometry, cross, dot

TWO_PI = 2.0 * math.pi


class SweepoutError(RuntimeError):
    pass


# -- marked loops ------------------------------------------------------------------


@dataclass(frozen=True)
class MarkedLoop:
    surface: ConeSurface
    marks: tuple[SurfacePoint, ...]
    arcs: tuple[GeodesicPath, ...]
    length: float

    @staticmethod
    def from_marks(surface: ConeSurface, marks) -> "MarkedLoop":
        marks = tuple(marks)
        if len(marks) < 3:
            raise ValueError("a marked loop needs at least 3 marks")
        arcs = []
        for i, m in enumerate(marks):
            nxt = marks[(i + 1) % len(marks)]
            arc = shortest_path(surface, m, nxt, math.inf)
            if arc is None:
                raise SearchExhausted("arc search failed between consecutive marks")
            arcs.append(arc)
        length = sum(a.total_length for a in arcs)
        return MarkedLoop(surface, marks, tuple(arcs), length)

    def path(self) -> GeodesicPath:
        return concatenate_paths(self.surface, list(self.arcs), closed=True)

    def midpoints(self) -> list[SurfacePoint]:
        return [point_along(arc, arc.total_length / 2.0) for arc in self.arcs]

    def diameter_bound(self) -> float:
        return self.length / 2.0

    def max_arc_length(self) -> float:
        return max(a.total_length for a in self.arcs)

    def straightness_defect(self) -> float:
        """Largest turning angle at a mark (radians); 0 for a closed geodesic."""
        worst = 0.0
        n = len(self.arcs)
        for i in range(n):
            a = self.arcs[i]
            b = self.arcs[(i + 1) % n]
            din = _arc_exit_direction(a)
            dout = _arc_entry_direction(b)
            if din is None or dout is None:
                continue
            if a.segments[-1][0] != b.segments[0][0]:
                link = _chart_link(self.surface, a.segments[-1][0], b.segments[0][0],
                                   a.end.z, b.start.z)
                if link is None:
                    continue
                dout = link.apply_vector(dout)
            ang = abs(math.atan2(cross(din, dout), dot(din, dout)))
            worst = max(worst, ang)
        return worst


def _arc_exit_direction(arc: GeodesicPath):
    for t, a, b in reversed(arc.segments):
        if abs(b - a) > 1e-12:
            return (b - a) / abs(b - a)
    return None


def _arc_entry_direction(arc: GeodesicPath):
    for t, a, b in arc.segments:
        if abs(b - a) > 1e-12:
            return (b - a) / abs(b - a)
    return None


def _chart_link(surface, t_from, t_to, z_from, z_to):
    for e in range(3):
        partner = surface.gluing.get((t_from, e))
        if partner is not None and partner[0] == t_to:
            psi = surface.transition(t_from, e)
            if abs(psi(z_to) - z_from) <= 1e-6:
                return psi
    return None


def point_along(path: GeodesicPath, s: float) -> SurfacePoint:
    """Point at arclength s along a path (norm lengths when present)."""
    remaining = s
    surface = path.surface
    for t, a, b in path.segments:
        ln = _seg_length(surface, t, a, b)
        if remaining <= ln or (t, a, b) == path.segments[-1]:
            if ln <= 1e-300:
                return SurfacePoint.of(t, a)
            frac = min(max(remaining / ln, 0.0), 1.0)
            return SurfacePoint.of(t, a + frac * (b - a))
        remaining -= ln
    t, a, b = path.segments[-1]
    return SurfacePoint.of(t, b)


def resample_marks(path: GeodesicPath, spacing: float,
                   min_marks: int = 3, max_marks: int = 600) -> list[SurfacePoint]:
    """Marks along a closed path at offsets (k + 1/2) * L / n."""
    n = max(min_marks, min(max_marks, int(math.ceil(path.total_length / spacing))))
    return [point_along(path, (k + 0.5) * path.total_length / n) for k in range(n)]


def mark_spacing(surface: ConeSurface, path: GeodesicPath | None = None) -> float:
    """Birkhoff mark spacing: an eighth of the smallest local edge length."""
    if path is None:
        tris = range(surface.n_triangles)
    else:
        tris = {t for t, _, _ in path.segments}
    return min(min(surface.lengths[t]) for t in tris) / 8.0


# -- plain shortening --------------------------------------------------------------


def half_step(loop: MarkedLoop) -> MarkedLoop:
    """Replace the arcs between consecutive arc midpoints by geodesics."""
    return MarkedLoop.from_marks(loop.surface, loop.midpoints())


def shorten_step(loop: MarkedLoop) -> MarkedLoop:
    """One full Birkhoff round (two half steps); length never increases."""
    return half_step(half_step(loop))


def shorten(loop: MarkedLoop, tol: float = 1e-9, max_iter: int = 200) -> dict:
    """Iterate Birkhoff rounds until a point curve or a geodesic remains.

    Returns {"kind": "point"|"geodesic", "loop"/"point", "trace": lengths,
    "iterations", "residual"}; hitting max_iter reports status
    "max_iter" alongside the geodesic candidate.
    """
    trace_lengths = [loop.length]
    current = loop
    status = "converged"
    for it in range(max_iter):
        if current.diameter_bound() < tol:
            return {"kind": "point", "point": current.marks[0],
                    "trace": trace_lengths, "iterations": it, "residual": 0.0}
        nxt = shorten_step(current)
        trace_lengths.append(nxt.length)
        drop = current.length - nxt.length
        current = nxt
        if drop < tol * max(1.0, current.length):
            break
    else:
        status = "max_iter"
    if current.diameter_bound() < tol:
        return {"kind": "point", "point": current.marks[0],
                "trace": trace_lengths, "iterations": len(trace_lengths) - 1,
                "residual": 0.0}
    return {"kind": "geodesic", "loop": current, "trace": trace_lengths,
            "iterations": len(trace_lengths) - 1, "status": status,
            "residual": current.straightness_defect()}


# -- deck action helpers -----------------------------------------------------------


def deck_point(cover: CoverMap, p: SurfacePoint, power: int = 1) -> SurfacePoint:
    t = p.tri
    for _ in range(power % 3):
        t = cover.deck_triangle(t)
    return SurfacePoint(t, p.xy)


def deck_path(cover: CoverMap, path: GeodesicPath, power: int = 1) -> GeodesicPath:
    def m(t):
        for _ in range(power % 3):
            t = cover.deck_triangle(t)
        return t

    segs = tuple((m(t), a, b) for (t, a, b) in path.segments)
    crossings = None
    if path.crossings is not None:
        crossings = tuple(None if link is None else (m(link[0]), link[1])
                          for link in path.crossings)
    return GeodesicPath(path.surface, segs, path.total_length, path.terminal,
                        path.terminal_vertex, path.closed, crossings)


def is_deck_invariant_loop(cover: CoverMap, loop: MarkedLoop,
                           tol: float = 1e-7) -> bool:
    """Is the mark set invariant (as a set) under the deck transformation?"""
    from .geodesic_engine import same_point

    marks = loop.marks
    n = len(marks)
    if n % 3 != 0:
        return False
    q = n // 3
    return all(same_point(cover.torus, deck_point(cover, marks[j]),
                          marks[(j + q) % n], tol=tol) for j in range(n))


# -- equivariant shortening --------------------------------------------------------


@dataclass
class SymmetricLoop:
    """A deck-symmetric marked loop on the cover torus.

    Only the fundamental third is stored; marks[j + q] is the deck image
    of marks[j] by construction, so the symmetry is exact.
    """

    cover: CoverMap
    third_marks: tuple[SurfacePoint, ...]
    third_arcs: tuple[GeodesicPath, ...]
    power: int

    @staticmethod
    def from_third(cover: CoverMap, third_marks, power: int = 1) -> "SymmetricLoop":
        marks = tuple(third_marks)
        arcs = []
        torus = cover.torus
        for i in range(len(marks)):
            if i + 1 < len(marks):
                nxt = marks[i + 1]
            else:
                nxt = deck_point(cover, marks[0], power)
            arc = shortest_path(torus, marks[i], nxt, math.inf)
            if arc is None:
                raise SearchExhausted("equivariant arc search failed")
            arcs.append(arc)
        return SymmetricLoop(cover, marks, tuple(arcs), power)

    @property
    def third_length(self) -> float:
        return sum(a.total_length for a in self.third_arcs)

    @property
    def length(self) -> float:
        return 3.0 * self.third_length

    def full_marks(self) -> list[SurfacePoint]:
        out = list(self.third_marks)
        for k in (1, 2):
            out.extend(deck_point(self.cover, m, (self.power * k) % 3)
                       for m in self.third_marks)
        return out

    def full_loop(self) -> MarkedLoop:
        arcs = list(self.third_arcs)
        for k in (1, 2):
            arcs.extend(deck_path(self.cover, a, (self.power * k) % 3)
                        for a in self.third_arcs)
        marks = tuple(self.full_marks())
        length = sum(a.total_length for a in arcs)
        return MarkedLoop(self.cover.torus, marks, tuple(arcs), length)

    def half_step(self) -> "SymmetricLoop":
        mids = [point_along(a, a.total_length / 2.0) for a in self.third_arcs]
        return SymmetricLoop.from_third(self.cover, mids, self.power)

    def projected_frame(self) -> tuple[float, tuple[SurfacePoint, ...]]:
        """Sphere loop swept by the fundamental third: (mass, marks)."""
        mass = self.third_length
        marks = tuple(SurfacePoint(self.cover.project_triangle(m.tri), m.xy)
                      for m in self.third_marks)
        return mass, marks

    def projected_path(self) -> GeodesicPath:
        pieces = [project_to_sphere(self.cover, a) for a in self.third_arcs]
        return concatenate_paths(self.cover.sphere, pieces, closed=True)

    def diameter_bound(self) -> float:
        return self.length / 2.0


def equivariant_shorten(cover: CoverMap, lifted_loop: MarkedLoop,
                        tol: float = 1e-9, max_iter: int = 300,
                        check_every: int = 1) -> dict:
    """Shorten a lift of a simple sphere loop, keeping it a lift throughout.

    Deck-invariant loops get deck-symmetric mark subdivisions (computed
    on a fundamental third and copied by the deck map), other lifts are
    shortened directly; in both cases the projection of every checked
    frame must stay simple, otherwise the run aborts with a diagnostic.
    """
    sphere_proj = _project_loop(cover, lifted_loop)
    if _projection_self_crossings(cover.sphere, sphere_proj) != 0:
        raise ValueError("input is not a lift of a simple sphere loop")

    if is_deck_invariant_loop(cover, lifted_loop):
        q = len(lifted_loop.marks) // 3
        sym = SymmetricLoop.from_third(cover, lifted_loop.marks[:q], power=1)
        return _shorten_symmetric(sym, tol=tol, max_iter=max_iter,
                                  check_every=check_every)

    frames = [lifted_loop]
    trace_lengths = [lifted_loop.length]
    current = lifted_loop
    for it in range(max_iter):
        if current.diameter_bound() < tol:
            return {"kind": "point", "frames": frames, "trace": trace_lengths,
                    "simple": True}
        nxt = shorten_step(current)
        if it % check_every == 0:
            proj = _project_loop(cover, nxt)
            if _projection_self_crossings(cover.sphere, proj) != 0:
                raise SweepoutError("equivariance violation: projection of an "
                                    "intermediate loop is not simple")
        frames.append(nxt)
        trace_lengths.append(nxt.length)
        if current.length - nxt.length < tol * max(1.0, nxt.length):
            current = nxt
            break
        current = nxt
    if current.diameter_bound() < tol:
        return {"kind": "point", "frames": frames, "trace": trace_lengths,
                "simple": True}
    return {"kind": "geodesic", "frames": frames, "trace": trace_lengths,
            "simple": True, "loop": current}


def _shorten_symmetric(sym: SymmetricLoop, tol: float, max_iter: int,
                       check_every: int = 5) -> dict:
    frames = [sym]
    trace_lengths = [sym.length]
    for it in range(max_iter):
        if sym.diameter_bound() < tol:
            break
        nxt = sym.half_step()
        if check_every and it % check_every == 0:
            proj = nxt.projected_path()
            if _projection_self_crossings(nxt.cover.sphere, proj) != 0:
                raise SweepoutError("equivariance violation: projected frame "
                                    "is not simple")
        frames.append(nxt)
        trace_lengths.append(nxt.length)
        if trace_lengths[-2] - trace_lengths[-1] < tol * max(1.0, nxt.length) \
                and nxt.diameter_bound() >= tol:
            # plateau above the point threshold: stalled at a geodesic
            return {"kind": "stalled", "frames": frames, "trace": trace_lengths,
                    "loop": nxt}
        sym = nxt
    kind = "point" if sym.diameter_bound() < tol else "stalled"
    return {"kind": kind, "frames": frames, "trace": trace_lengths, "loop": sym}


def _project_loop(cover: CoverMap, loop: MarkedLoop) -> GeodesicPath:
    pieces = [project_to_sphere(cover, a) for a in loop.arcs]
    return concatenate_paths(cover.sphere, pieces, closed=True)


def _projection_self_crossings(sphere: ConeSurface, proj: GeodesicPath) -> int:
    crossings = _self_crossings(sphere, proj)
    if crossings is None:
        return -1
    return len(crossings)


# -- lifted domain boundaries ------------------------------------------------------


def _departure_ray(cover: CoverMap, path: GeodesicPath, at_start: bool):
    """(corner, unit direction) of a based loop's departure or arrival."""
    torus = cover.torus
    segs = path.segments if at_start else tuple(reversed(
        [(t, b, a) for (t, a, b) in path.segments]))
    for t, a, b in segs:
        if abs(b - a) > 1e-12:
            return t, a, (b - a) / abs(b - a)
    raise ValueError("degenerate loop")


def _vertex_ray_angle(surface: ConeSurface, v: int, tri: int, z: complex,
                      direction: complex) -> float:
    """Cyclic angular coordinate of a ray leaving vertex v inside chart tri."""
    acc = 0.0
    for (t, c) in _star_cycle(surface, v):
        corners = surface.corners(t)
        if t == tri and abs(corners[c] - z) <= 1e-9:
            e1 = corners[(c + 1) % 3] - corners[c]
            ang = math.atan2(cross(e1, direction * abs(e1)),
                             dot(e1, direction * abs(e1)))
            if ang < -1e-9:
                ang += TWO_PI
            return acc + min(max(ang, 0.0), surface.corner_angle(t, c))
        acc += surface.corner_angle(t, c)
    raise ValueError("ray does not start at the given vertex")


def _star_cycle(surface: ConeSurface, v: int):
    start = surface.vertex_corners[v][0]
    out = [start]
    cur = start
    for _ in range(len(surface.vertex_corners[v]) + 1):
        cur = surface.next_corner_ccw(*cur)
        if cur == start:
            break
        out.append(cur)
    return out


def lifted_domain_boundaries(cover: CoverMap, loop: GeodesicPath,
                             power: int = 1) -> list[GeodesicPath]:
    """Boundaries of the two disks cut out by the deck orbit of a based loop.

    The loop is based at a ramification point; its three deck images form
    a wedge of circles there, whose complement on the torus is two disks.
    Each disk boundary is stitched by walking the six rays at the vertex
    in cyclic order: after arriving along one image the boundary departs
    along the next ray on the chosen side.
    """
    torus = cover.torus
    t0, z0, _ = _departure_ray(cover, loop, at_start=True)
    v = None
    for c in range(3):
        if abs(torus.corners(t0)[c] - z0) <= 1e-9:
            v = torus.vertex_of(t0, c)
    if v is None or v not in cover.ramification_vertices:
        raise SweepoutError("loop is not based at a ramification point")

    lifts = [loop if k == 0 else deck_path(cover, loop, (power * k) % 3)
             for k in range(3)]
    rays = []  # (theta, lift index, "dep"/"arr")
    for k, lf in enumerate(lifts):
        td, zd, ud = _departure_ray(cover, lf, at_start=True)
        ta, za, ua = _departure_ray(cover, lf, at_start=False)
        rays.append((_vertex_ray_angle(torus, v, td, zd, ud), k, "dep"))
        rays.append((_vertex_ray_angle(torus, v, ta, za, -ua), k, "arr"))
    rays.sort()
    if len(rays) != 6:
        raise SweepoutError("expected six rays at the basepoint")

    def stitch(turn: int) -> GeodesicPath:
        order = {(kind, k): idx for idx, (_, k, kind) in enumerate(rays)}
        pieces = []
        used = []
        k, forward = 0, True
        for _ in range(3):
            pieces.append(lifts[k] if forward else lifts[k].reversed())
            used.append(k)
            arrive = ("arr", k) if forward else ("dep", k)
            idx = order[arrive]
            _, k2, kind2 = rays[(idx + turn) % 6]
            k, forward = k2, (kind2 == "dep")
        if sorted(used) != [0, 1, 2] or (k, forward) != (0, True):
            raise SweepoutError("boundary stitching did not close over the three lifts")
        return concatenate_paths(torus, pieces, closed=True)

    return [stitch(+1), stitch(-1)]


def domain_contains_vertex(cover: CoverMap, boundary: GeodesicPath,
                           candidates) -> list[int]:
    """Which torus vertices the (null-homotopic) boundary encloses."""
    from .geodesic_engine import _vertices_inside

    return sorted(_vertices_inside(cover.torus, boundary, candidates))


# -- sweepouts ---------------------------------------------------------------------


@dataclass(frozen=True)
class FrameLoop:
    mass: float
    marks: tuple[SurfacePoint, ...] | None   # None encodes a point curve


@dataclass
class SweepOut:
    """Finite family of cycles from the null cycle to itself.

    Each frame is a multiset of loops; the minimax is the largest frame
    mass and the step bound caps how far consecutive frames move.
    """

    frames: list[tuple[FrameLoop, ...]]
    minimax: float
    step_bound: float
    details: dict = field(default_factory=dict, repr=False)

    def masses(self) -> list[float]:
        return [sum(fl.mass for fl in frame) for frame in self.frames]

    def to_json(self) -> dict:
        return {
            "frames": [
                [{"mass": fl.mass,
                  "marks": None if fl.marks is None else
                  [[m.tri, m.xy[0], m.xy[1]] for m in fl.marks]}
                 for fl in frame]
                for frame in self.frames
            ],
            "minimax": self.minimax,
            "step_bound": self.step_bound,
        }


def _null_frame() -> tuple[FrameLoop, ...]:
    return ()


def _shrink_boundary(cover: CoverMap, boundary: GeodesicPath, power: int,
                     tol: float, max_iter: int) -> list[SymmetricLoop]:
    """Deck-symmetric Birkhoff shrink of a lifted disk boundary to a point."""
    spacing = mark_spacing(cover.torus, boundary)
    third_len = boundary.total_length / 3.0
    q = max(4, min(200, int(math.ceil(third_len / spacing))))
    marks = [point_along(boundary, (j + 0.5) * third_len / q) for j in range(q)]
    sym = SymmetricLoop.from_third(cover, marks, power)
    result = _shorten_symmetric(sym, tol=tol, max_iter=max_iter, check_every=0)
    if result["kind"] != "point":
        raise SweepoutError(
            "shortening stalled at an unexpected closed geodesic of length "
            f"{result['loop'].length:.6g} (a (P3)-type failure)")
    return result["frames"]


def _frames_from_shrink(shrink: list[SymmetricLoop]) -> list[FrameLoop]:
    out = []
    for sym in shrink:
        mass, marks = sym.projected_frame()
        out.append(FrameLoop(mass=mass, marks=marks))
    return out


def _step_bound(shrinks: list[list[SymmetricLoop]]) -> float:
    worst = 0.0
    for frames in shrinks:
        for sym in frames:
            worst = max(worst, max(a.total_length for a in sym.third_arcs))
    return worst


def two_domain_sweepout(cover: CoverMap, loop: GeodesicPath,
                        tol: float = 1e-7, max_iter: int = 400) -> SweepOut:
    """Sweepout from a based simple geodesic loop at a marked vertex.

    The loop's deck orbit bounds two disks on the torus; both boundaries
    are shrunk to points equivariantly, and the projected families are
    concatenated into one family of loops whose largest length equals
    the input loop's length.
    """
    sphere = cover.sphere
    t0, z0, _ = _departure_ray(cover, loop, at_start=True)
    v = None
    for c in range(3):
        if abs(cover.torus.corners(t0)[c] - z0) <= 1e-9:
            v = cover.torus.vertex_of(t0, c)
    if v not in cover.ramification_vertices:
        raise SweepoutError("loop must be based at a ramification point")
    i = cover.ramification_vertices.index(v)
    angle = sphere.cone_angle(sphere.marked[i])
    if angle >= math.pi:
        raise SweepoutError("basepoint cone angle must be below pi (P2)")

    proj = project_to_sphere(cover, loop)
    if _projection_self_crossings(sphere, proj) != 0:
        raise SweepoutError("loop projection is not simple; cannot cut two domains")

    boundaries = lifted_domain_boundaries(cover, loop)
    others = [y for y in cover.ramification_vertices if y != v]
    shrinks = []
    for boundary in boundaries:
        inside = domain_contains_vertex(cover, boundary, others)
        if len(inside) != 1:
            raise SweepoutError("loop does not separate the two other vertices")
        shrinks.append(_shrink_boundary(cover, boundary, power=1,
                                        tol=tol, max_iter=max_iter))

    fam_a = _frames_from_shrink(shrinks[0])
    fam_b = _frames_from_shrink(shrinks[1])
    frames: list[tuple[FrameLoop, ...]] = [_null_frame()]
    frames.extend((fl,) for fl in reversed(fam_a))
    frames.extend((fl,) for fl in fam_b)
    frames.append(_null_frame())

    minimax = max(sum(fl.mass for fl in fr) for fr in frames)
    if abs(minimax - loop.total_length) > 1e-6 * max(1.0, loop.total_length):
        raise SweepoutError("sweepout minimax does not match the generating loop")
    return SweepOut(frames=frames, minimax=minimax,
                    step_bound=_step_bound(shrinks),
                    details={"basepoint_index": i, "shrinks": shrinks,
                             "generator_length": loop.total_length})


def _petal_lift(cover: CoverMap, loop: GeodesicPath,
                i: int, si: float, j: int, sj: float) -> GeodesicPath:
    """Torus sub-path of a systolic loop over one lobe of its projection."""
    segs = list(loop.segments)
    crossings = list(loop.crossing_list())
    n = len(segs)
    t1, a1, b1 = segs[i]
    x1 = a1 + si * (b1 - a1)
    t2, a2, b2 = segs[j]
    x2 = a2 + sj * (b2 - a2)
    out = [(t1, x1, b1)]
    cr = []
    k = i
    while k != j:
        cr.append(crossings[k % n])
        k = (k + 1) % n
        if k != j:
            out.append(segs[k])
    out.append((t2, a2, x2))
    surf = loop.surface
    total = sum(_seg_length(surf, t, a, b) for t, a, b in out)
    return GeodesicPath(surf, tuple(out), total, "endpoint",
                        crossings=tuple(cr))


def three_domain_sweepout(cover: CoverMap, torus_loop: GeodesicPath,
                          tol: float = 1e-7, max_iter: int = 400) -> SweepOut:
    """Sweepout from a systolic torus loop avoiding the ramification points.

    The projection must be a figure eight; the three complementary
    domains lift to disks whose boundaries are shrunk to points, and the
    projected families are assembled into a family of one-cycles with
    largest mass equal to the figure-eight length.
    """
    from .geodesic_engine import ClassifyResult, classify_systolic_projection

    result = classify_systolic_projection(cover, torus_loop)
    if result.kind != "figure_eight":
        raise SweepoutError(f"projection is not a figure eight: {result}")

    proj = project_to_sphere(cover, torus_loop)
    crossings = _self_crossings(cover.sphere, proj)
    (ci, si), (cj, sj) = crossings[0]

    lobe_lifts = [_petal_lift(cover, torus_loop, ci, si, cj, sj),
                  _petal_lift(cover, torus_loop, cj, sj, ci, si)]

    # each lobe lift runs between two lifts of the crossing point; a deck
    # power matches its endpoints so three copies close up the disk boundary
    shrinks = []
    petal_frames = []
    for lift in lobe_lifts:
        power = _closing_power(cover, lift)
        boundary = concatenate_paths(
            cover.torus,
            [lift, deck_path(cover, lift, power), deck_path(cover, lift, 2 * power)],
            closed=True)
        shrink = _shrink_boundary(cover, boundary, power=power,
                                  tol=tol, max_iter=max_iter)
        shrinks.append(shrink)
        petal_frames.append(_frames_from_shrink(shrink))

    # outer domain: its boundary alternates the two lobes (one reversed, as
    # the outer region sees the lobes with opposite orientations) and closes
    # after three rounds through the lifts of the crossing point
    outer_boundary, outer_power = _stitch_outer_boundary(cover, lobe_lifts)
    outer_shrink = _shrink_boundary(cover, outer_boundary, power=outer_power,
                                    tol=tol, max_iter=max_iter)
    outer_frames = _frames_from_shrink(outer_shrink)

    alpha = torus_loop.total_length
    frames: list[tuple[FrameLoop, ...]] = [_null_frame()]
    frames.extend((fl,) for fl in reversed(outer_frames))
    # the figure eight splits into its two lobes at the crossing: same support
    first1 = petal_frames[0][0]
    first2 = petal_frames[1][0]
    frames.append((first1, first2))
    for fl in petal_frames[0][1:]:
        frames.append((fl, first2))
    for fl in petal_frames[1][1:]:
        frames.append((fl,))
    frames.append(_null_frame())

    minimax = max(sum(fl.mass for fl in fr) for fr in frames)
    if abs(minimax - alpha) > 1e-6 * max(1.0, alpha):
        raise SweepoutError("three-domain minimax does not match the loop length")
    return SweepOut(frames=frames, minimax=minimax,
                    step_bound=_step_bound(shrinks + [outer_shrink]),
                    details={"domains": result.domains,
                             "generator_length": alpha,
                             "shrinks": shrinks + [outer_shrink]})


def _closing_power(cover: CoverMap, lift: GeodesicPath) -> int:
    from .geodesic_engine import same_point

    end = lift.end
    for power in (1, 2):
        if same_point(cover.torus, deck_point(cover, lift.start, power), end,
                      tol=1e-7):
            return power
    raise SweepoutError("lobe lift endpoints are not deck translates")


def _stitch_outer_boundary(cover: CoverMap, lobe_lifts) -> tuple[GeodesicPath, int]:
    """Boundary of the lifted outer domain of a figure eight.

    Pieces alternate deck images of the first lobe (forward) and the
    second lobe (reversed); consecutive pieces are matched at lifts of
    the crossing point.  Returns the closed boundary and the deck power
    advancing it by one round (a third of its length).
    """
    from .geodesic_engine import same_point

    torus = cover.torus
    l1, l2 = lobe_lifts
    for flip_first in (False, True):
        a = l1.reversed() if flip_first else l1
        b = l2 if flip_first else l2.reversed()
        pieces = [a]
        power_round = None
        cur_end = a.end
        ok = True
        for step in range(1, 6):
            template = b if step % 2 == 1 else a
            for power in (0, 1, 2):
                cand = deck_path(cover, template, power)
                if same_point(torus, cand.start, cur_end, tol=1e-7):
                    pieces.append(cand)
                    cur_end = cand.end
                    if step == 2 and power_round is None:
                        power_round = power
                    break
            else:
                ok = False
                break
        if not ok or power_round is None:
            continue
        if not same_point(torus, cur_end, pieces[0].start, tol=1e-7):
            continue
        if power_round == 0:
            continue  # closed after one round: not a branched boundary
        return concatenate_paths(torus, pieces, closed=True), power_round
    raise SweepoutError("could not stitch the outer domain boundary")


# -- torus systole and the diastole upper bound -------------------------------------


def approx_holonomy_lattice(torus: ConeSurface, cocycle: dict) -> Lattice2D:
    """Least-squares translation lattice of a (nearly flat) torus."""
    from .cone_complex import _dual_spanning_tree

    tree, nontree = _dual_spanning_tree(torus)
    placements = {0: Isometry.identity()}
    queue = [0]
    while queue:
        t = queue.pop(0)
        for e in range(3):
            t2, e2 = torus.gluing[(t, e)]
            key = min((t, e), (t2, e2))
            if key in tree and t2 not in placements:
                placements[t2] = placements[t].compose(torus.transition(t, e))
                queue.append(t2)
    import numpy as np

    rows = []
    rhs = []
    for key in nontree:
        t, e = key
        t2, e2 = torus.gluing[key]
        delta = placements[t].compose(torus.transition(t, e)).compose(
            placements[t2].inverse())
        m, n = cocycle[key]
        rows.append([m, 0, n, 0])
        rows.append([0, m, 0, n])
        rhs.append(delta.b.real)
        rhs.append(delta.b.imag)
    sol, *_ = np.linalg.lstsq(np.array(rows, dtype=float), np.array(rhs), rcond=None)
    return Lattice2D((sol[0], sol[1]), (sol[2], sol[3]))


def _straight_class_loop(cover: CoverMap, lattice: Lattice2D, coeffs,
                         offset_index: int = 0) -> MarkedLoop | None:
    """Marked loop tracing the (m, n) class near a straight line."""
    torus = cover.torus
    m, n = coeffs
    vec = complex(*lattice.vector(m, n))
    t0 = 0
    c0, c1, c2 = torus.corners(t0)
    w = (0.17 + 0.61 * offset_index) % 1.0
    u = (0.23 + 0.37 * offset_index) % 1.0
    z = c0 * (1 - w) * (1 - u) + c1 * w * (1 - u) + c2 * u
    # direction of the class in this chart: development from triangle 0 is the
    # identity, so the translation vector applies directly
    direction = vec / abs(vec)
    try:
        path = trace(torus, SurfacePoint.of(t0, z), direction, abs(vec) * 1.0001)
    except (ValueError, RuntimeError):
        return None
    if path.terminal == "cone_point":
        return None
    spacing = mark_spacing(torus, path)
    marks = resample_marks(path, spacing)
    try:
        return MarkedLoop.from_marks(torus, marks)
    except SearchExhausted:
        return None


def exact_corridor_length(loop: MarkedLoop) -> float | None:
    """Exact closed-geodesic length from the loop's crossing corridor.

    Composing the chart transitions around the loop gives the holonomy;
    when its rotation part is trivial the straight representative of the
    corridor has length equal to the translation part, independent of
    the marks.  Euclidean charts only.
    """
    surface = loop.surface
    if any(surface.norms[t] is not None for t in range(surface.n_triangles)):
        return None
    phi = Isometry.identity()
    start_tri = loop.arcs[0].segments[0][0]
    for arc in loop.arcs:
        for link in arc.crossing_list():
            if link is None:
                return None
            phi = phi.compose(surface.transition(*link))
    if abs(phi.a - 1.0) > 1e-9:
        return None
    return abs(phi.b)


def torus_systole(cover: CoverMap, max_classes: int = 8) -> dict:
    """Systole of the cover torus.

    Flat tori reduce to lattice enumeration (exact).  Otherwise straight
    loops of the shortest homotopy classes of the least-squares flat
    approximation are transferred, Birkhoff-shortened from several
    offsets, and polished by the corridor holonomy, which is exact once
    the crossing combinatorics are fixed.
    """
    torus = cover.torus
    lattice = holonomy_lattice(torus)
    if lattice is not None:
        norm = Norm2D.euclidean()
        res = shortest_vector(FlatTorus(lattice, norm))
        return {"sys": res.length, "flat": True, "coeffs": res.coeffs,
                "lattice": lattice}

    approx = approx_holonomy_lattice(torus, cover.cocycle)
    from .minkowski import eval_norm_many
    import numpy as np

    cands = []
    for m in range(-3, 4):
        for n in range(-3, 4):
            if (m, n) == (0, 0) or (m < 0 or (m == 0 and n < 0)):
                continue
            cands.append(((m, n), abs(complex(*approx.vector(m, n)))))
    cands.sort(key=lambda c: c[1])
    shortest = cands[0][1]
    classes = [c for c in cands if c[1] <= 1.35 * shortest][:max_classes]

    best = math.inf
    best_loop = None
    for coeffs, _ in classes:
        for offset in range(4):
            loop = _straight_class_loop(cover, approx, coeffs, offset)
            if loop is None:
                continue
            result = shorten(loop, tol=1e-10, max_iter=60)
            if result["kind"] != "geodesic":
                continue
            candidate = result["loop"]
            exact = exact_corridor_length(candidate)
            value = exact if exact is not None else candidate.length
            if value < best:
                best = value
                best_loop = candidate
    if best_loop is None:
        raise SearchExhausted("no systolic candidate loop could be built")
    return {"sys": best, "flat": False, "loop": best_loop, "lattice": approx}


def off_vertex_systolic_loop(cover: CoverMap) -> GeodesicPath | None:
    """A systolic straight loop avoiding the ramification points, if found."""
    torus = cover.torus
    info = torus_systole(cover)
    if info["flat"]:
        lattice = info["lattice"]
        res = shortest_vector(FlatTorus(lattice, Norm2D.euclidean()))
        vec = complex(*res.vector)
        for offset in range(8):
            t0 = 0
            c0, c1, c2 = torus.corners(t0)
            w = (0.21 + 0.13 * offset) % 0.8 + 0.1
            u = (0.33 + 0.17 * offset) % 0.8 + 0.1
            z = c0 * (1 - w) * (1 - u) + c1 * w * (1 - u) + c2 * u
            try:
                path = trace(torus, SurfacePoint.of(t0, z), vec / abs(vec),
                             abs(vec) * (1 + 1e-12))
            except (ValueError, RuntimeError):
                continue
            if path.terminal == "cone_point":
                continue
            from .geodesic_engine import same_point
            if not same_point(torus, path.start, path.end, tol=1e-7):
                continue
            closed = GeodesicPath(torus, path.segments, path.total_length,
                                  "endpoint", closed=True,
                                  crossings=path.crossings)
            return closed
        return None
    loop = info["loop"]
    path = loop.path()
    return GeodesicPath(path.surface, path.segments, path.total_length,
                        "endpoint", closed=True, crossings=path.crossings)


def dias_upper_bound(cover: CoverMap, thorough: bool = True,
                     tol: float = 1e-7, max_iter: int = 400) -> dict:
    """Diastole upper bound: best sweepout over all available generators.

    Candidates are the two-domain sweepouts of the three pointed
    punctured systolic loops plus the three-domain sweepout of an
    off-vertex systolic loop when one exists.  With thorough=False only
    the best generator's witness is constructed (the value is the same:
    each sweepout's minimax equals its generator's length).
    """
    from .geodesic_engine import pointed_systole_punctured

    generators = []
    for i in range(3):
        try:
            value, loop = pointed_systole_punctured(cover, i)
            generators.append(("two_domain", i, value, loop))
        except SearchExhausted:
            continue
    fig8 = off_vertex_systolic_loop(cover)
    if fig8 is not None:
        generators.append(("three_domain", None, fig8.total_length, fig8))
    if not generators:
        raise SweepoutError("no sweepout generator could be constructed")

    generators.sort(key=lambda g: g[2])
    candidates = generators if thorough else generators[:1]
    best = None
    errors = []
    for kind, i, value, loop in candidates:
        try:
            if kind == "two_domain":
                sw = two_domain_sweepout(cover, loop, tol=tol, max_iter=max_iter)
            else:
                sw = three_domain_sweepout(cover, loop, tol=tol, max_iter=max_iter)
        except SweepoutError as exc:
            errors.append(str(exc))
            continue
        if best is None or sw.minimax < best["value"]:
            best = {"value": sw.minimax, "witness": sw, "kind": kind,
                    "generator_index": i}
    if best is None:
        raise SweepoutError("every sweepout construction failed: " + "; ".join(errors))
    best["generator_lengths"] = [g[2] for g in generators]
    return best
