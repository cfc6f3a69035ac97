"""Exact geodesics on piecewise-flat surfaces by chart unfolding.

Straight-line tracing develops successive triangle charts into a fixed
plane frame, so a geodesic is literally a straight planar segment pulled
back chart by chart.  Distances run a best-first search over unfolding
chains: each search state carries the visibility cone of directions that
still cross every edge window of its chain, which makes the straight-
line lower bound exact and prunes hard.  Shortest paths may pass through
cone points of angle > 2*pi; those are handled by concatenating straight
chains at such vertices.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from heapq import heappop, heappush

from .cone_complex import ConeSurface, CoverMap, universal_cover_piece
from .minkowski import eval_norm
from .planar import Isometry, cross, dot, seg_point_distance, segments_intersect

TWO_PI = 2.0 * math.pi
_CONE_TOL = 1e-9       # angular slack keeping exact vertex-grazing chains alive
_VERTEX_HIT_TOL = 1e-9


class SearchExhausted(RuntimeError):
    """A bounded geodesic search ended without the required candidate."""


@dataclass(frozen=True)
class SurfacePoint:
    tri: int
    xy: tuple[float, float]

    @property
    def z(self) -> complex:
        return complex(self.xy[0], self.xy[1])

    @staticmethod
    def of(tri: int, z: complex) -> "SurfacePoint":
        return SurfacePoint(tri, (z.real, z.imag))


def same_point(surface: ConeSurface, p: SurfacePoint, q: SurfacePoint,
               tol: float = 1e-9) -> bool:
    """Do two chart points represent the same surface point?"""
    if p.tri == q.tri:
        return abs(p.z - q.z) <= tol
    for e in range(3):
        if surface.gluing.get((p.tri, e), (None,))[0] == q.tri:
            psi = surface.transition(p.tri, e)
            if abs(psi(q.z) - p.z) <= tol:
                return True
    return False


def _seg_length(surface: ConeSurface, tri: int, a: complex, b: complex) -> float:
    norm = surface.norms[tri]
    if norm is None:
        return abs(b - a)
    d = b - a
    return eval_norm(norm, (d.real, d.imag))


@dataclass(frozen=True)
class GeodesicPath:
    """Chain of chart segments; consecutive segments share a glued edge.

    crossings[i] records how segment i hands over to segment i+1: an
    edge slot (t, e) of segment i's triangle, or None at a vertex
    junction of a concatenated path.
    """

    surface: ConeSurface
    segments: tuple[tuple[int, complex, complex], ...]
    total_length: float
    terminal: str                      # endpoint | cone_point | length_exhausted | boundary
    terminal_vertex: int | None = None
    closed: bool = False
    crossings: tuple | None = None

    @property
    def start(self) -> SurfacePoint:
        t, a, _ = self.segments[0]
        return SurfacePoint.of(t, a)

    @property
    def end(self) -> SurfacePoint:
        t, _, b = self.segments[-1]
        return SurfacePoint.of(t, b)

    def crossing_list(self) -> tuple:
        if self.crossings is not None:
            return self.crossings
        out = []
        surf = self.surface
        for i in range(1, len(self.segments)):
            t_prev = self.segments[i - 1][0]
            t_cur = self.segments[i][0]
            exit_prev = self.segments[i - 1][2]
            entry_cur = self.segments[i][1]
            found = None
            for e in range(3):
                partner = surf.gluing.get((t_prev, e))
                if partner is None or partner[0] != t_cur:
                    continue
                psi = surf.transition(t_prev, e)
                if abs(psi(entry_cur) - exit_prev) <= 1e-6:
                    found = (t_prev, e)
                    break
            out.append(found)
        return tuple(out)

    def develop(self, base: Isometry | None = None) -> list[Isometry]:
        """Placement isometry (chart -> plane) for every segment."""
        placements = [base or Isometry.identity()]
        surf = self.surface
        crossings = self.crossing_list()
        for i in range(1, len(self.segments)):
            link = crossings[i - 1]
            if link is not None:
                placements.append(placements[-1].compose(surf.transition(*link)))
                continue
            t_prev = self.segments[i - 1][0]
            t_cur = self.segments[i][0]
            if t_prev == t_cur:
                placements.append(placements[-1])
                continue
            psi = _star_link(surf, t_prev, self.segments[i - 1][2],
                             t_cur, self.segments[i][1])
            if psi is None:
                raise ValueError("segments do not chain across a gluing")
            placements.append(placements[-1].compose(psi))
        return placements

    def polyline(self, base: Isometry | None = None) -> list[complex]:
        """Developed planar polyline (entry points plus the final exit)."""
        placements = self.develop(base)
        pts = [phi(seg[1]) for phi, seg in zip(placements, self.segments)]
        pts.append(placements[-1](self.segments[-1][2]))
        return pts

    def reversed(self) -> "GeodesicPath":
        segs = tuple((t, b, a) for (t, a, b) in reversed(self.segments))
        rev_cross = None
        if self.crossings is not None:
            rev = []
            for link in reversed(self.crossings):
                rev.append(None if link is None else self.surface.gluing[link])
            rev_cross = tuple(rev)
        return GeodesicPath(self.surface, segs, self.total_length, self.terminal,
                            self.terminal_vertex, self.closed, rev_cross)


def _star_link(surf: ConeSurface, t_prev: int, exit_prev: complex,
               t_cur: int, entry_cur: complex):
    """Isometry linking charts that meet only at a shared vertex.

    Walks the vertex star counterclockwise from t_prev until t_cur shows
    up with the junction points matching; the choice of side is a fixed
    convention for developing concatenated paths.
    """
    corner = None
    for c in range(3):
        if abs(surf.corners(t_prev)[c] - exit_prev) <= 1e-7:
            corner = c
            break
    if corner is None:
        return None
    t, c = t_prev, corner
    psi = Isometry.identity()
    star = len(surf.vertex_corners[surf.vertex_of(t_prev, corner)])
    for _ in range(2 * star + 2):
        e_cross = (c + 2) % 3
        if (t, e_cross) not in surf.gluing:
            return None
        psi = psi.compose(surf.transition(t, e_cross))
        t, e2 = surf.gluing[(t, e_cross)]
        c = e2
        if t == t_cur and abs(psi(entry_cur) - exit_prev) <= 1e-7:
            return psi
    return None

    def to_json(self) -> dict:
        return {
            "segments": [{"triangle": t,
                          "entry": [a.real, a.imag],
                          "exit": [b.real, b.imag]} for t, a, b in self.segments],
            "lengths": [_seg_length(self.surface, t, a, b) for t, a, b in self.segments],
            "total_length": self.total_length,
            "terminal": self.terminal,
            "closed": self.closed,
        }


def concatenate_paths(surface: ConeSurface, paths: list[GeodesicPath],
                      closed: bool = False) -> GeodesicPath:
    segs: list[tuple[int, complex, complex]] = []
    crossings: list = []
    total = 0.0
    for k, p in enumerate(paths):
        if k > 0:
            crossings.append(None)  # legs meet at a vertex, not across an edge
        segs.extend(p.segments)
        crossings.extend(p.crossing_list())
        total += p.total_length
    return GeodesicPath(surface, tuple(segs), total,
                        terminal="endpoint", closed=closed,
                        crossings=tuple(crossings))


# -- straight-line tracing -------------------------------------------------------


def trace(surface: ConeSurface, start: SurfacePoint, direction,
          max_length: float) -> GeodesicPath:
    """Develop a straight ray until the length budget runs out.

    Terminates early with `cone_point` when the ray hits a vertex (the
    geodesic does not continue through a conical singularity) and with
    `boundary` when it leaves a surface piece through an unglued edge.
    """
    if max_length <= 0:
        raise ValueError("max_length must be positive")
    u = complex(direction[0], direction[1]) if not isinstance(direction, complex) \
        else direction
    if abs(u) == 0:
        raise ValueError("direction must be nonzero")
    u /= abs(u)

    tri = start.tri
    corners = surface.corners(tri)
    for c, pz in enumerate(corners):
        if abs(start.z - pz) <= _VERTEX_HIT_TOL:
            raise ValueError("trace cannot start at a cone point")

    phi = Isometry(1.0 + 0j, -start.z)   # chart -> plane, ray from origin
    scale = max(max(surface.lengths[tri]), 1.0)
    s_cur = 0.0
    consumed = 0.0
    entry_edge: int | None = None
    segments: list[tuple[int, complex, complex]] = []

    for _hop in range(100_000):
        inv = phi.inverse()
        placed = [phi(z) for z in surface.corners(tri)]

        # vertex hit: ray passes within tolerance of a developed corner ahead
        hit_vertex = None
        hit_s = math.inf
        for c, pz in enumerate(placed):
            s = dot(pz, u)
            if s > s_cur + 1e-12 * scale and abs(cross(u, pz)) <= _VERTEX_HIT_TOL * max(1.0, s):
                if s < hit_s:
                    hit_s, hit_vertex = s, c

        # exit edge: earliest crossing among the other edges
        best_s, best_e = math.inf, None
        for e in range(3):
            if e == entry_edge:
                continue
            a, b = placed[e], placed[(e + 1) % 3]
            denom = cross(u, b - a)
            if abs(denom) < 1e-15 * scale:
                continue
            t_edge = cross(-a, u) / cross(b - a, u)
            s = cross(a, b - a) / denom
            if -1e-9 <= t_edge <= 1.0 + 1e-9 and s > s_cur + 1e-12 * scale:
                if s < best_s:
                    best_s, best_e = s, e

        if hit_vertex is not None and hit_s <= best_s + _VERTEX_HIT_TOL:
            norm_rate = _rate(surface, tri, inv, u)
            if consumed + (hit_s - s_cur) * norm_rate >= max_length - 1e-15:
                end_s = s_cur + (max_length - consumed) / norm_rate
                segments.append((tri, inv(s_cur * u), inv(end_s * u)))
                return GeodesicPath(surface, tuple(segments), max_length, "length_exhausted")
            segments.append((tri, inv(s_cur * u), inv(hit_s * u)))
            consumed += (hit_s - s_cur) * norm_rate
            return GeodesicPath(surface, tuple(segments), consumed, "cone_point",
                                terminal_vertex=surface.vertex_of(tri, hit_vertex))

        if best_e is None:
            raise RuntimeError("ray failed to exit the triangle (degenerate data)")

        norm_rate = _rate(surface, tri, inv, u)
        seg_budget = (max_length - consumed) / norm_rate
        if best_s - s_cur >= seg_budget - 1e-15:
            end_s = s_cur + seg_budget
            segments.append((tri, inv(s_cur * u), inv(end_s * u)))
            return GeodesicPath(surface, tuple(segments), max_length, "length_exhausted")

        segments.append((tri, inv(s_cur * u), inv(best_s * u)))
        consumed += (best_s - s_cur) * norm_rate
        s_cur = best_s
        partner = surface.gluing.get((tri, best_e))
        if partner is None:
            return GeodesicPath(surface, tuple(segments), consumed, "boundary")
        phi = phi.compose(surface.transition(tri, best_e))
        tri, entry_edge = partner
        scale = max(max(surface.lengths[tri]), scale)
    raise RuntimeError("trace exceeded the hop limit")


def _rate(surface: ConeSurface, tri: int, inv: Isometry, u: complex) -> float:
    """Norm length per unit Euclidean length along direction u."""
    norm = surface.norms[tri]
    if norm is None:
        return 1.0
    w = inv.apply_vector(u)
    return eval_norm(norm, (w.real, w.imag))


# -- exact distance search -------------------------------------------------------


@dataclass
class _State:
    tri: int
    phi: Isometry
    entry: tuple[int, ...]                 # edges not to expand through
    cone: tuple[complex, complex] | None   # None = unrestricted (source triangle)
    lb: float
    parent: "_State | None" = None
    crossed: tuple[int, int] | None = None  # edge of the parent we crossed
    depth: int = 0
    via: tuple = ()                         # star steps of a vertex pass-through
    via_point: complex | None = None        # developed position of that vertex


def _subtended(a: complex, b: complex):
    """Angular interval (CCW pair of unit dirs) subtended by segment [a, b]."""
    ra, rb = abs(a), abs(b)
    if ra < 1e-15 or rb < 1e-15:
        return None
    ua, ub = a / ra, b / rb
    if cross(ua, ub) < 0:
        ua, ub = ub, ua
    return (ua, ub)


def _cone_intersect(c1, c2):
    if c1 is None:
        return c2
    if c2 is None:
        return c1
    d1, d2 = c1
    e1, e2 = c2

    def inside(x, a, b):
        return cross(a, x) >= -_CONE_TOL and cross(x, b) >= -_CONE_TOL

    if inside(d1, e1, e2):
        start = d1
    elif inside(e1, d1, d2):
        start = e1
    else:
        return False
    if inside(d2, e1, e2):
        end = d2
    elif inside(e2, d1, d2):
        end = e2
    else:
        return False
    if cross(start, end) < -_CONE_TOL:
        return False  # empty
    return (start, end)


def _in_cone(cone, u: complex, tol: float = _CONE_TOL) -> bool:
    if cone is None:
        return True
    d1, d2 = cone
    return cross(d1, u) >= -tol and cross(u, d2) >= -tol


def _clip_to_cone(a: complex, b: complex, cone) -> tuple[complex, complex]:
    """Clip segment [a, b] (ordered CCW as seen from origin) to the cone."""
    if cone is None:
        return a, b
    d1, d2 = cone
    out_a, out_b = a, b
    ca = cross(d1, a)
    cb = cross(d1, b)
    if ca < 0 <= cb or cb < 0 <= ca:
        t = ca / (ca - cb)
        pt = a + t * (b - a)
        if cross(d1, out_a) < 0:
            out_a = pt
        else:
            out_b = pt
    ca = cross(a - 0, d2)
    cb = cross(b - 0, d2)
    if ca < 0 <= cb or cb < 0 <= ca:
        t = ca / (ca - cb)
        pt = a + t * (b - a)
        if cross(out_b, d2) < 0:
            out_b = pt
        else:
            out_a = pt
    return out_a, out_b


def _source_states(surface: ConeSurface, source) -> list[_State]:
    """Initial states for a point source or a vertex source."""
    kind, data = source
    states = []
    if kind == "point":
        p: SurfacePoint = data
        tris = [(p.tri, p.z)]
        for e in range(3):
            a, b = surface.edge_endpoints(p.tri, e)
            if seg_point_distance(p.z, a, b) <= 1e-12 and (p.tri, e) in surface.gluing:
                t2, _ = surface.gluing[(p.tri, e)]
                psi = surface.transition(p.tri, e).inverse()
                tris.append((t2, psi(p.z)))
        for t, z in tris:
            states.append(_State(tri=t, phi=Isometry(1.0 + 0j, -z),
                                 entry=(), cone=None, lb=0.0))
    elif kind == "vertex":
        v: int = data
        for (t, c) in surface.vertex_corners[v]:
            corner = surface.corners(t)[c]
            nxt = surface.corners(t)[(c + 1) % 3]
            prv = surface.corners(t)[(c + 2) % 3]
            d1 = (nxt - corner) / abs(nxt - corner)
            d2 = (prv - corner) / abs(prv - corner)
            states.append(_State(tri=t, phi=Isometry(1.0 + 0j, -corner),
                                 entry=(), cone=(d1, d2), lb=0.0))
    else:
        raise ValueError(kind)
    return states


def _expand(surface: ConeSurface, state: _State, limit: float,
            relays: set | None = None):
    """Children of a search state.

    Nondegenerate states propagate visibility cones clipped by edge
    windows.  Once a cone pinches to a single ray the corridor advances
    by exact ray-edge crossings, whose ray parameter grows monotonically
    and bounds the search.  A ray hitting a vertex continues straight
    through cone angle exactly 2*pi (the surface is smooth there), stops
    at smaller angles, and at larger angles records the vertex as a
    relay for the saddle graph, which explores the full fan of geodesic
    continuations.
    """
    degenerate = state.cone is not None and \
        cross(state.cone[0], state.cone[1]) <= 1e-12
    if degenerate:
        return _expand_ray(surface, state, limit, relays)
    out = []
    for e in range(3):
        if e in state.entry or (state.tri, e) not in surface.gluing:
            continue
        a = state.phi(surface.corners(state.tri)[e])
        b = state.phi(surface.corners(state.tri)[(e + 1) % 3])
        sub = _subtended(a, b)
        if sub is None:
            continue
        if cross(sub[0], sub[1]) < -_CONE_TOL:
            continue
        cone = _cone_intersect(state.cone, sub)
        if cone is False:
            continue
        if cross(cone[0], cone[1]) <= 1e-12:
            child = _degenerate_child(surface, state, e, a, b, cone, limit, relays)
            if child is not None:
                out.append(child)
            continue
        ca, cb = a, b
        if cross(a / abs(a), b / abs(b)) < 0:
            ca, cb = b, a
        wa, wb = _clip_to_cone(ca, cb, cone)
        lb = max(state.lb, seg_point_distance(0.0j, wa, wb))
        if lb > limit + 1e-12:
            continue
        t2, e2 = surface.gluing[(state.tri, e)]
        phi2 = state.phi.compose(surface.transition(state.tri, e))
        out.append(_State(tri=t2, phi=phi2, entry=(e2,), cone=cone, lb=lb,
                          parent=state, crossed=(state.tri, e), depth=state.depth + 1))
    return out


def _expand_ray(surface, state, limit, relays):
    """Advance a single-ray corridor across the earliest edge crossing."""
    u = state.cone[0] + state.cone[1]
    u /= abs(u)
    best = None
    for e in range(3):
        if e in state.entry or (state.tri, e) not in surface.gluing:
            continue
        a = state.phi(surface.corners(state.tri)[e])
        b = state.phi(surface.corners(state.tri)[(e + 1) % 3])
        hit = _ray_cross_edge(u, a, b)
        if hit is None:
            continue
        s_ray, pt = hit
        if s_ray <= state.lb - 1e-9 * (1.0 + state.lb):
            continue
        if best is None or s_ray < best[0]:
            best = (s_ray, pt, e, a, b)
    if best is None:
        return []
    s_ray, pt, e, a, b = best
    if s_ray > limit + 1e-12:
        return []
    return _ray_step(surface, state, e, pt, s_ray, (u, u), relays)


def _degenerate_child(surface, state, e, a, b, cone, limit, relays):
    """First pinch of a cone: locate the exact ray crossing on edge e."""
    u = cone[0] + cone[1]
    u /= abs(u)
    hit = _ray_cross_edge(u, a, b)
    if hit is None:
        return None
    s_ray, pt = hit
    if s_ray > limit + 1e-12:
        return None
    children = _ray_step(surface, state, e, pt, s_ray, (u, u), relays)
    return children[0] if children else None


def _ray_step(surface, state, e, pt, s_ray, cone, relays):
    """Cross edge e at developed point pt, handling vertex hits."""
    scale = 1.0 + abs(pt)
    for c in (e, (e + 1) % 3):
        pc = state.phi(surface.corners(state.tri)[c])
        if abs(pc - pt) <= 1e-8 * scale:
            v = surface.vertex_of(state.tri, c)
            angle = surface.cone_angle(v)
            if abs(angle - TWO_PI) <= 1e-9:
                cont = _pass_through_state(surface, state, state.tri, c, pc)
                return [cont] if cont is not None else []
            if angle > TWO_PI and relays is not None:
                relays.add(v)
            return []
    t2, e2 = surface.gluing[(state.tri, e)]
    phi2 = state.phi.compose(surface.transition(state.tri, e))
    return [_State(tri=t2, phi=phi2, entry=(e2,), cone=cone, lb=s_ray,
                   parent=state, crossed=(state.tri, e), depth=state.depth + 1)]


def _ray_cross_edge(u: complex, a: complex, b: complex):
    """Ray {s*u : s > 0} against segment [a, b]; returns (s, point)."""
    d = b - a
    denom = cross(u, d)
    scale = max(abs(d), 1e-300)
    if abs(denom) <= 1e-14 * scale:
        return None
    t_edge = cross(-a, u) / cross(d, u)
    if t_edge < -1e-9 or t_edge > 1.0 + 1e-9:
        return None
    s_ray = cross(a, d) / denom
    if s_ray <= 0:
        return None
    return s_ray, a + min(max(t_edge, 0.0), 1.0) * d


def _pass_through_state(surface, state, tri, c_idx, pv):
    """Continue a corridor straight through a smooth (2*pi) vertex.

    Walks the developed star of the vertex to find the wedge containing
    the continuation direction and spawns a degenerate-cone state there.
    """
    u = pv / abs(pv)
    t, c = tri, c_idx
    phi = state.phi
    star = len(surface.vertex_corners[surface.vertex_of(tri, c_idx)])
    via = []
    for _ in range(2 * star + 2):
        e_cross = (c + 2) % 3
        if (t, e_cross) not in surface.gluing:
            return None
        via.append((t, e_cross))
        phi = phi.compose(surface.transition(t, e_cross))
        t, e2 = surface.gluing[(t, e_cross)]
        c = e2
        corners = surface.corners(t)
        d1 = phi(corners[(c + 1) % 3]) - pv
        d2 = phi(corners[(c + 2) % 3]) - pv
        if cross(d1, u) > 1e-12 and cross(u, d2) > 1e-12:
            skip = (c, (c + 2) % 3)  # the two edges meeting at the vertex
            return _State(tri=t, phi=phi, entry=skip, cone=(u, u),
                          lb=max(state.lb, abs(pv)), parent=state,
                          crossed=None, depth=state.depth + 1,
                          via=tuple(via), via_point=pv)
    return None


def _candidate_at(surface: ConeSurface, state: _State, target) -> complex | None:
    """Planar position of the target within this state, if visible."""
    kind, data = target
    if kind == "point":
        q: SurfacePoint = data
        if state.tri != q.tri:
            return None
        qz = state.phi(q.z)
    else:
        v: int = data
        qz = None
        for c in range(3):
            if surface.vertex_of(state.tri, c) == v:
                cz = state.phi(surface.corners(state.tri)[c])
                if qz is None or abs(cz) < abs(qz):
                    qz = cz
        if qz is None:
            return None
    r = abs(qz)
    if r <= 1e-12:
        return None
    if _in_cone(state.cone, qz / r, tol=_CONE_TOL * 10):
        return qz
    return None


def _chain_edges(state: _State) -> list[tuple[int, int]]:
    edges = []
    s = state
    while s.parent is not None:
        if s.crossed is not None:
            edges.append(s.crossed)
        else:
            edges.extend(s.via)
        s = s.parent
    edges.reverse()
    return edges


def _chain_path(surface: ConeSurface, state: _State, qz: complex) -> GeodesicPath:
    """Reconstruct the straight chain as a GeodesicPath.

    Vertex pass-throughs contribute zero-length connector segments in
    the star triangles they touch, so consecutive segments always share
    a recorded edge crossing.
    """
    chain: list[_State] = []
    s = state
    while s is not None:
        chain.append(s)
        s = s.parent
    chain.reverse()
    r = abs(qz)
    u = qz / r if r > 0 else 1.0 + 0j
    cuts = [0.0]
    for st in chain[1:]:
        if st.crossed is None:
            cuts.append(min(max(abs(st.via_point), cuts[-1]), r))
            continue
        t_par, e = st.crossed
        prev = st.parent
        a = prev.phi(surface.corners(t_par)[e])
        b = prev.phi(surface.corners(t_par)[(e + 1) % 3])
        denom = cross(u, b - a)
        if abs(denom) < 1e-15:
            cuts.append(cuts[-1])
            continue
        s_cross = cross(a, b - a) / denom
        cuts.append(min(max(s_cross, cuts[-1]), r))
    cuts.append(r)
    segments = []
    crossings = []
    total = 0.0
    for i, st in enumerate(chain):
        if i > 0:
            if chain[i].crossed is not None:
                crossings.append(chain[i].crossed)
            else:
                # connectors through the vertex star, one per crossing
                pv = chain[i].via_point
                phi_walk = chain[i].parent.phi
                for k, (t_step, e_step) in enumerate(chain[i].via):
                    crossings.append((t_step, e_step))
                    phi_walk = phi_walk.compose(surface.transition(t_step, e_step))
                    t_in, _ = surface.gluing[(t_step, e_step)]
                    if k < len(chain[i].via) - 1:
                        z = phi_walk.inverse()(pv)
                        segments.append((t_in, z, z))
        inv = st.phi.inverse()
        a = inv(cuts[i] * u)
        b = inv(cuts[i + 1] * u)
        segments.append((st.tri, a, b))
        total += _seg_length(surface, st.tri, a, b)
    return GeodesicPath(surface, tuple(segments), total, "endpoint",
                        crossings=tuple(crossings))


def _straight_search(surface: ConeSurface, source, target, bound: float,
                     collect_all: bool = False, max_hits: int = 2000,
                     extra_vertex_targets=None):
    """Best-first search over straight unfolding chains.

    Returns (best_length, best_path, extra_hits) where extra_hits maps
    each requested extra vertex to its best straight chain found within
    the active limit.  With collect_all, instead returns the list of all
    distinct straight chains from source to target within bound.
    """
    heap: list[tuple[float, int, _State]] = []
    counter = 0
    for st in _source_states(surface, source):
        heappush(heap, (st.lb, counter, st))
        counter += 1

    best = math.inf
    best_path: GeodesicPath | None = None
    hits: list[tuple[float, GeodesicPath]] = []
    extra_hits: dict[int, tuple[float, GeodesicPath]] = {}
    seen_sigs = set()
    pinch_relays: set[int] = set()  # saddles already covered via extra_hits
    pops = 0
    while heap:
        lb, _, state = heappop(heap)
        limit = bound if collect_all else min(bound, best)
        if lb > limit + 1e-12:
            break
        pops += 1
        if pops > 2_000_000:
            raise SearchExhausted("straight-chain search exploded")
        qz = _candidate_at(surface, state, target)
        if qz is not None and abs(qz) > 1e-12:
            length = _norm_chain_length(surface, state, qz)
            if length <= limit + 1e-9:
                if collect_all:
                    sig = (round(length, 9), tuple(sorted(_chain_edges(state))),
                           round(qz.real, 7), round(qz.imag, 7))
                    if sig not in seen_sigs:
                        seen_sigs.add(sig)
                        hits.append((length,
                                     _chain_path(surface, state, qz)))
                        if len(hits) >= max_hits:
                            break
                elif length < best - 1e-15:
                    best = length
                    best_path = _chain_path(surface, state, qz)
        if extra_vertex_targets:
            for v in extra_vertex_targets:
                vz = _candidate_at(surface, state, ("vertex", v))
                if vz is None or abs(vz) <= 1e-12:
                    continue
                length = _norm_chain_length(surface, state, vz)
                if length <= limit + 1e-9 and \
                        (v not in extra_hits or length < extra_hits[v][0] - 1e-15):
                    extra_hits[v] = (length,
                                     _chain_path(surface, state, vz))
        for child in _expand(surface, state, bound if collect_all else min(bound, best),
                             relays=pinch_relays):
            heappush(heap, (child.lb, counter, child))
            counter += 1
    if collect_all:
        hits.sort(key=lambda h: h[0])
        return hits
    return best, best_path, extra_hits


def _norm_chain_length(surface: ConeSurface, state: _State, qz: complex) -> float:
    """Length of the straight chain; equals |qz| for Euclidean surfaces."""
    if all(surface.norms[t] is None for t in range(surface.n_triangles)):
        return abs(qz)
    path = _chain_path(surface, state, qz)
    return path.total_length


def _skeleton_distance_upper(surface: ConeSurface, source, target) -> float:
    """Dijkstra over the 1-skeleton as an upper bound (includes edge paths)."""

    def nodes_of(spec):
        kind, data = spec
        if kind == "vertex":
            return {data: 0.0}
        p: SurfacePoint = data
        out = {}
        for c in range(3):
            v = surface.vertex_of(p.tri, c)
            d = abs(p.z - surface.corners(p.tri)[c])
            if surface.norms[p.tri] is not None:
                w = surface.corners(p.tri)[c] - p.z
                d = eval_norm(surface.norms[p.tri], (w.real, w.imag))
            out[v] = min(out.get(v, math.inf), d)
        return out

    starts = nodes_of(source)
    goals = nodes_of(target)
    adj: dict[int, list[tuple[float, int]]] = {}
    seen = set()
    for (t, e), (t2, e2) in surface.gluing.items():
        key = min((t, e), (t2, e2))
        if key in seen:
            continue
        seen.add(key)
        va = surface.vertex_of(t, e)
        vb = surface.vertex_of(t, (e + 1) % 3)
        ln = surface.lengths[t][e]
        if surface.norms[t] is not None:
            a, b = surface.edge_endpoints(t, e)
            ln = eval_norm(surface.norms[t], ((b - a).real, (b - a).imag))
        adj.setdefault(va, []).append((ln, vb))
        adj.setdefault(vb, []).append((ln, va))
    dist = dict(starts)
    heap = [(d, v) for v, d in starts.items()]
    import heapq as _hq
    _hq.heapify(heap)
    while heap:
        d, v = _hq.heappop(heap)
        if d > dist.get(v, math.inf):
            continue
        for ln, w in adj.get(v, ()):
            nd = d + ln
            if nd < dist.get(w, math.inf) - 1e-15:
                dist[w] = nd
                _hq.heappush(heap, (nd, w))
    best = math.inf
    for v, dg in goals.items():
        if v in dist:
            best = min(best, dist[v] + dg)
    return best


def _saddle_vertices(surface: ConeSurface) -> list[int]:
    out = []
    boundary_vertices = set()
    for (t, e) in surface.boundary_edges():
        boundary_vertices.add(surface.vertex_of(t, e))
        boundary_vertices.add(surface.vertex_of(t, (e + 1) % 3))
    for v in range(surface.n_vertices):
        if v in boundary_vertices:
            continue
        if surface.cone_angle(v) > TWO_PI + 1e-9:
            out.append(v)
    return out


def shortest_path(surface: ConeSurface, p: SurfacePoint | int, q: SurfacePoint | int,
                  bound: float) -> GeodesicPath | None:
    """Exact shortest geodesic between two points (or vertices) within bound.

    Straight chains are searched directly; paths through saddle vertices
    (cone angle > 2*pi) are assembled by a small Dijkstra over the
    saddle graph with straight-chain legs.
    """
    source = ("vertex", p) if isinstance(p, int) else ("point", p)
    target = ("vertex", q) if isinstance(q, int) else ("point", q)

    if isinstance(p, int) and isinstance(q, int) and p == q:
        t, c = surface.vertex_corners[p][0]
        z = surface.corners(t)[c]
        return GeodesicPath(surface, ((t, z, z),), 0.0, "endpoint")
    if not isinstance(p, int) and not isinstance(q, int) and same_point(surface, p, q):
        return GeodesicPath(surface, ((p.tri, p.z, p.z),), 0.0, "endpoint")

    upper = _skeleton_distance_upper(surface, source, target)
    seed = None
    if not isinstance(p, int) and not isinstance(q, int):
        seed = _direct_chord(surface, p, q)
        if seed is not None:
            upper = min(upper, seed.total_length)
    limit = min(bound, upper + 1e-12)

    saddles = frozenset(_saddle_vertices(surface))
    best, best_path, saddle_hits = _straight_search(
        surface, source, target, limit, extra_vertex_targets=saddles)
    if seed is not None and seed.total_length < best:
        best, best_path = seed.total_length, seed
    if upper < best and upper <= bound:
        sk = _skeleton_witness(surface, source, target)
        if sk is not None and sk.total_length < best:
            best, best_path = sk.total_length, sk

    if saddle_hits:
        best, best_path = _saddle_refine(surface, target, saddles, saddle_hits,
                                         min(bound, best), best, best_path)
    if best_path is None or best > bound + 1e-9:
        return None
    return best_path


def _skeleton_witness(surface, source, target) -> GeodesicPath | None:
    """Edge-path witness (only used when it beats all straight chains)."""
    # Rare: realize the skeleton path as a chain of edge-running segments.
    kind_s, ps = source
    kind_t, pt = target
    if kind_s != "vertex" or kind_t != "vertex":
        return None
    from .cone_complex import _skeleton_shortest_arc
    arc = _skeleton_shortest_arc(surface, ps, pt, blocked=set())
    if arc is None:
        return None
    segments = []
    total = 0.0
    cur = ps
    for (t, e) in arc:
        a, b = surface.edge_endpoints(t, e)
        va = surface.vertex_of(t, e)
        vb = surface.vertex_of(t, (e + 1) % 3)
        if va == cur:
            segments.append((t, a, b))
            cur = vb
        else:
            segments.append((t, b, a))
            cur = va
        total += _seg_length(surface, t, a, b)
    return GeodesicPath(surface, tuple(segments), total, "endpoint")


def _saddle_refine(surface, target, saddles, source_hits, bound, best, best_path):
    """Lazy Dijkstra over saddle vertices reached from the source.

    source_hits already holds the straight legs source -> saddle found
    within the direct-search limit; legs between saddles and to the
    target are computed on demand with the remaining budget as cap.
    """
    dist: dict[int, float] = {}
    paths: dict[int, list[GeodesicPath]] = {}
    heap: list[tuple[float, int]] = []
    for v, (ln, pth) in source_hits.items():
        dist[v] = ln
        paths[v] = [pth]
        heappush(heap, (ln, v))

    while heap:
        d, v = heappop(heap)
        if d > dist.get(v, math.inf) + 1e-15 or d >= best - 1e-12:
            continue
        cap = min(bound, best) - d
        ln, pth, more = _straight_search(surface, ("vertex", v), target, cap,
                                         extra_vertex_targets=saddles)
        if pth is not None and d + ln < best - 1e-12:
            best = d + ln
            best_path = concatenate_paths(surface, paths[v] + [pth])
        for w, (lw, pw) in more.items():
            if w == v:
                continue
            nd = d + lw
            if nd < dist.get(w, math.inf) - 1e-12 and nd < best - 1e-12:
                dist[w] = nd
                paths[w] = paths[v] + [pw]
                heappush(heap, (nd, w))
    return best, best_path


def _direct_chord(surface: ConeSurface, p: SurfacePoint,
                  q: SurfacePoint) -> GeodesicPath | None:
    """Cheap upper-bound path: same-triangle chord or two-triangle unfold."""
    if p.tri == q.tri:
        seg = ((p.tri, p.z, q.z),)
        return GeodesicPath(surface, seg, _seg_length(surface, p.tri, p.z, q.z),
                            "endpoint", crossings=())
    for e in range(3):
        partner = surface.gluing.get((p.tri, e))
        if partner is None or partner[0] != q.tri:
            continue
        psi = surface.transition(p.tri, e)
        qz = psi(q.z)
        a, b = surface.edge_endpoints(p.tri, e)
        hit = segments_intersect(p.z, qz, a, b, eps=1e-12)
        if hit is None:
            continue
        s_par, _ = hit
        mid = p.z + s_par * (qz - p.z)
        mid_q = psi.inverse()(mid)
        segs = ((p.tri, p.z, mid), (q.tri, mid_q, q.z))
        total = _seg_length(surface, p.tri, p.z, mid) + \
            _seg_length(surface, q.tri, mid_q, q.z)
        return GeodesicPath(surface, segs, total, "endpoint",
                            crossings=((p.tri, e),))
    return None


def distance(surface: ConeSurface, p, q, bound: float) -> float | None:
    """Exact geodesic distance if it does not exceed bound, else None."""
    path = shortest_path(surface, p, q, bound)
    return None if path is None else path.total_length


def min_vertex_distance(sphere: ConeSurface) -> float:
    """Minimum pairwise geodesic distance among the marked vertices."""
    if len(sphere.marked) < 2:
        raise ValueError("need at least 2 marked vertices")
    best = math.inf
    marked = list(sphere.marked)
    for i in range(len(marked)):
        for j in range(i + 1, len(marked)):
            upper = _skeleton_distance_upper(sphere, ("vertex", marked[i]),
                                             ("vertex", marked[j]))
            d = distance(sphere, marked[i], marked[j], upper + 1e-9)
            if d is not None:
                best = min(best, d)
    return best


# -- geodesic loops at a vertex ---------------------------------------------------


def geodesic_loops_at_vertex(surface: ConeSurface, v: int, budget: float,
                             max_loops: int = 400) -> list[GeodesicPath]:
    """Candidate geodesic loops based at vertex v with length <= budget.

    Candidates are straight chains from v back to v plus concatenations
    of up to three straight legs bending at saddle vertices (every
    locally length-minimizing based loop has this form; deeper saddle
    chains are not enumerated).  Sorted by length.
    """
    loops = [path for _, path in
             _straight_search(surface, ("vertex", v), ("vertex", v), budget,
                              collect_all=True, max_hits=max_loops)]

    saddles = [s for s in _saddle_vertices(surface) if s != v]
    if saddles:
        legs: dict[int, list[tuple[float, GeodesicPath]]] = {}
        for s in saddles:
            hits = _straight_search(surface, ("vertex", v), ("vertex", s), budget,
                                    collect_all=True, max_hits=12)
            if hits:
                legs[s] = hits
        # two legs: v -> s -> v
        for s, hits in legs.items():
            for ia in range(len(hits)):
                for ib in range(len(hits)):
                    if ia == ib:
                        continue
                    la, pa = hits[ia]
                    lb, pb = hits[ib]
                    if la + lb <= budget + 1e-9:
                        loops.append(concatenate_paths(
                            surface, [pa, pb.reversed()], closed=True))
        # three legs: v -> s1 -> s2 -> v (middle legs computed lazily)
        ids = sorted(legs)
        for s1 in ids:
            for s2 in ids:
                if s1 >= s2:
                    continue
                l1 = legs[s1][0][0]
                l2 = legs[s2][0][0]
                cap = budget - l1 - l2
                if cap <= 1e-9:
                    continue
                mids = _straight_search(surface, ("vertex", s1), ("vertex", s2),
                                        cap, collect_all=True, max_hits=6)
                for lm, pm in mids:
                    for la, pa in legs[s1]:
                        for lb, pb in legs[s2]:
                            if la + lm + lb <= budget + 1e-9:
                                loops.append(concatenate_paths(
                                    surface, [pa, pm, pb.reversed()], closed=True))
    for p in loops:
        object.__setattr__(p, "closed", True)
    loops.sort(key=lambda p: p.total_length)
    return loops[:max_loops]


# -- pointed systole of the punctured sphere --------------------------------------


def _arc_between(sphere: ConeSurface, va: int, vb: int,
                 avoid: set[int]) -> tuple[list, dict]:
    from .cone_complex import _skeleton_shortest_arc, _arc_left_sides
    arc = _skeleton_shortest_arc(sphere, va, vb, blocked=set(avoid))
    if arc is None:
        raise SearchExhausted("no reference arc between the punctures")
    left = dict(zip(arc, _arc_left_sides(sphere, va, arc)))
    return arc, left


def _arc_interior_vertices(sphere: ConeSurface, va: int, arc_keys) -> set[int]:
    out = set()
    cur = va
    for (t, e) in arc_keys:
        x, y = sphere.vertex_of(t, e), sphere.vertex_of(t, (e + 1) % 3)
        cur = y if x == cur else x
        out.add(cur)
    return out


def signed_arc_crossings(surface: ConeSurface, loop: GeodesicPath, arc_keys: set,
                         left_sides: dict) -> int:
    """Net signed intersection number of a closed loop with a skeleton arc.

    Crossing the arc from the left of its orientation counts +1.  Vertex
    junctions of concatenated loops contribute nothing (callers must
    keep the arc away from vertices the loop visits).
    """
    total = 0
    for link in loop.crossing_list():
        if link is None:
            continue
        t, e = link
        partner = surface.gluing[(t, e)]
        key = min((t, e), partner)
        if key in arc_keys:
            tl, el = left_sides[key]
            total += 1 if (tl, el) == (t, e) else -1
    return total


def pointed_systole_punctured(cover: CoverMap, i: int) -> tuple[float, GeodesicPath]:
    """Shortest loop at marked vertex i noncontractible once the other two
    marked vertices are removed.

    Loops at x_i lift to based geodesic loops at the ramification point
    y_i on the torus; candidates up to the 2*delta budget are enumerated
    there and filtered by the signed-crossing test against a reference
    arc joining the two punctures.  Raises SearchExhausted when no
    candidate exists within the budget.
    """
    sphere = cover.sphere
    torus = cover.torus
    delta = min_vertex_distance(sphere)
    budget = 2.0 * delta * (1.0 + 1e-9)
    yi = cover.ramification_vertices[i]
    xi = sphere.marked[i]
    xa = sphere.marked[(i + 1) % 3]
    xb = sphere.marked[(i + 2) % 3]

    loops = geodesic_loops_at_vertex(torus, yi, budget)
    avoid = {xi}
    for _try in range(6):
        arc, left = _arc_between(sphere, xa, xb, avoid)
        arc_keys = set(arc)
        arc_vertices = _arc_interior_vertices(sphere, xa, arc_keys)
        retry = False
        for loop in loops:
            proj = project_to_sphere(cover, loop)
            touched = _segments_touch_vertices(sphere, proj.segments,
                                               arc_vertices - {xa, xb})
            if touched:
                avoid |= touched
                retry = True
                break
            if signed_arc_crossings(sphere, proj, arc_keys, left) != 0:
                return loop.total_length, loop
        if not retry:
            break
    raise SearchExhausted(
        f"no noncontractible based loop at marked vertex {i} within 2*delta")


def _segments_touch_vertices(surface, segments, vertices: set[int]) -> set[int]:
    touched = set()
    if not vertices:
        return touched
    for (t, a, b) in segments:
        for c in range(3):
            v = surface.vertex_of(t, c)
            if v in vertices and seg_point_distance(surface.corners(t)[c], a, b) < 1e-9:
                touched.add(v)
    return touched


def project_to_sphere(cover: CoverMap, path: GeodesicPath) -> GeodesicPath:
    """Project a torus path through the cover (charts are identical)."""
    segs = tuple((cover.project_triangle(t), a, b) for (t, a, b) in path.segments)
    crossings = None
    if path.crossings is not None:
        crossings = tuple(None if link is None else
                          (cover.project_triangle(link[0]), link[1])
                          for link in path.crossings)
    return GeodesicPath(cover.sphere, segs, path.total_length, path.terminal,
                        None, path.closed, crossings)


# -- closed geodesic search (heuristic) and loop classification -------------------


def closed_geodesic_search(surface: ConeSurface, length_bound: float, grid: int,
                           near_tol: float = 1e-3) -> list:
    """Shooting heuristic for closed geodesics below a length bound.

    grid x grid (start point, direction) pairs are traced; trajectories
    that come back near their start in position and direction are closed
    up and polished with the Birkhoff process.  Completeness is NOT
    guaranteed: absence of hits is evidence, not proof.
    """
    from .birkhoff import MarkedLoop, shorten

    if grid < 1:
        raise ValueError("grid must be >= 1")
    found: list[MarkedLoop] = []
    tris = list(range(surface.n_triangles))
    for idx in range(grid):
        t = tris[(idx * 7919) % len(tris)]
        c0, c1, c2 = surface.corners(t)
        w = 0.2 + 0.6 * ((idx * 0.6180339887498949) % 1.0)
        p = SurfacePoint.of(t, c0 * (1 - w) * 0.5 + c1 * w * 0.5 + c2 * 0.5)
        for jdx in range(grid):
            ang = TWO_PI * (jdx + 0.5 * (idx % 2)) / grid
            u = cmath.exp(1j * ang)
            path = trace(surface, p, u, length_bound * 1.02)
            loop = _near_return_loop(surface, path, p, u, near_tol)
            if loop is None:
                continue
            result = shorten(loop, tol=1e-10, max_iter=400)
            if result["kind"] != "geodesic":
                continue
            candidate = result["loop"]
            if candidate.length > length_bound + 1e-9:
                continue
            if any(_loops_equivalent(candidate, other) for other in found):
                continue
            found.append(candidate)
    return found


def _near_return_loop(surface, path: GeodesicPath, p: SurfacePoint, u: complex,
                      near_tol: float):
    from .birkhoff import MarkedLoop

    placements = path.develop()
    best = None
    run = 0.0
    for k, (seg, phi) in enumerate(zip(path.segments, placements)):
        t, a, b = seg
        seg_len = _seg_length(surface, t, a, b)
        if t == p.tri and k > 0:
            pz = phi(p.z)
            s = dot(pz, u)
            if s > 1e-6:
                gap = abs(pz - s * u) + abs(phi.a - 1.0) * s * 0.5
                if gap <= near_tol and (best is None or gap < best[0]):
                    best = (gap, k, s)
        run += seg_len
    if best is None:
        return None
    _, k, s = best
    marks = [p]
    for seg, phi in zip(path.segments[: k + 1], placements[: k + 1]):
        t, a, b = seg
        mid = (a + b) / 2.0
        if abs(phi(mid)) < s - 1e-9 and dot(phi(mid), u) > 1e-9:
            marks.append(SurfacePoint.of(t, mid))
    if len(marks) < 3:
        return None
    return MarkedLoop.from_marks(surface, marks)


def _loops_equivalent(a, b, tol: float = 1e-6) -> bool:
    if abs(a.length - b.length) > tol * max(1.0, a.length):
        return False
    return _loop_contains_point(b, a.marks[0], tol=5e-3 * max(1.0, a.length))


def _loop_contains_point(loop, p: SurfacePoint, tol: float) -> bool:
    for (t, a, b) in loop.path().segments:
        if t == p.tri and seg_point_distance(p.z, a, b) <= tol:
            return True
    return False


@dataclass(frozen=True)
class ClassifyResult:
    kind: str                               # through_ramification | figure_eight | invalid
    ramification_index: int | None = None
    domains: tuple = ()
    reason: str = ""


def classify_systolic_projection(cover: CoverMap, loop: GeodesicPath) -> ClassifyResult:
    """Classify the sphere projection of a (systolic) torus loop.

    A loop through a ramification point reports its index; otherwise the
    projection must be a figure eight (exactly one transverse crossing)
    decomposing the sphere into three domains, one marked vertex in each.
    """
    if not loop.closed:
        return ClassifyResult(kind="invalid", reason="loop is not closed")
    torus = cover.torus
    for i, yi in enumerate(cover.ramification_vertices):
        for (t, a, b) in loop.segments:
            for c in range(3):
                if torus.vertex_of(t, c) == yi:
                    if seg_point_distance(torus.corners(t)[c], a, b) <= 1e-9:
                        return ClassifyResult(kind="through_ramification",
                                              ramification_index=i)

    proj = project_to_sphere(cover, loop)
    crossings = _self_crossings(cover.sphere, proj)
    if crossings is None:
        return ClassifyResult(kind="invalid",
                              reason="projection has a non-transverse coincidence")
    if len(crossings) != 1:
        return ClassifyResult(
            kind="invalid",
            reason=f"projection has {len(crossings)} transverse crossings, not 1")
    (i, si), (j, sj) = crossings[0]
    petal1 = _sub_loop(proj, i, si, j, sj)
    petal2 = _sub_loop(proj, j, sj, i, si)
    inside1 = _vertices_inside(cover.sphere, petal1, cover.sphere.marked)
    inside2 = _vertices_inside(cover.sphere, petal2, cover.sphere.marked)
    if len(inside1) != 1 or len(inside2) != 1 or inside1 == inside2:
        return ClassifyResult(kind="invalid",
                              reason=f"petal vertex counts {len(inside1)}/{len(inside2)}")
    outside = [v for v in cover.sphere.marked if v not in inside1 | inside2]
    if len(outside) != 1:
        return ClassifyResult(kind="invalid", reason="outer domain vertex count != 1")
    domains = (tuple(sorted(inside1)), tuple(sorted(inside2)), tuple(outside))
    return ClassifyResult(kind="figure_eight", domains=domains)


def _self_crossings(surface: ConeSurface, path: GeodesicPath):
    n = len(path.segments)
    crossings = []
    for i in range(n):
        t1, a1, b1 = path.segments[i]
        for j in range(i + 1, n):
            if j == i or (i == 0 and j == n - 1):
                adjacent = (j == i + 1) or (i == 0 and j == n - 1)
            else:
                adjacent = (j == i + 1)
            t2, a2, b2 = path.segments[j]
            if t1 != t2:
                continue
            hit = segments_intersect(a1, b1, a2, b2)
            if hit is not None:
                crossings.append(((i, hit[0]), (j, hit[1])))
                continue
            if not adjacent:
                # endpoint coincidences between distant segments are suspicious
                for pz in (a2, b2):
                    if seg_point_distance(pz, a1, b1) < 1e-9:
                        mid_dist = min(abs(pz - a1), abs(pz - b1))
                        if mid_dist > 1e-9:
                            return None
    return crossings


def _sub_loop(path: GeodesicPath, i: int, si: float, j: int, sj: float) -> GeodesicPath:
    """Closed sub-loop from parameter si on segment i to sj on segment j."""
    segs = list(path.segments)
    n = len(segs)
    t1, a1, b1 = segs[i]
    x1 = a1 + si * (b1 - a1)
    t2, a2, b2 = segs[j]
    x2 = a2 + sj * (b2 - a2)
    out = [(t1, x1, b1)]
    k = (i + 1) % n
    while k != j:
        out.append(segs[k])
        k = (k + 1) % n
    out.append((t2, a2, x2))
    surf = path.surface
    total = sum(_seg_length(surf, t, a, b) for t, a, b in out)
    return GeodesicPath(surf, tuple(out), total, "endpoint", closed=True)


def _vertices_inside(surface: ConeSurface, loop: GeodesicPath,
                     vertices) -> set[int]:
    """Marked vertices enclosed by a null-homotopic simple loop.

    The loop is developed into the plane (it closes there) and each
    candidate vertex placement is tested by winding number.
    """
    from .planar import winding_number

    placements = loop.develop()
    poly = [phi(seg[1]) for phi, seg in zip(placements, loop.segments)]
    closure_gap = abs(placements[-1](loop.segments[-1][2]) - poly[0])
    if closure_gap > 1e-6 * max(1.0, loop.total_length):
        raise ValueError("loop does not develop to a closed plane polygon")
    inside = set()
    for v in vertices:
        spots = []
        for phi, (t, _, _) in zip(placements, loop.segments):
            for c in range(3):
                if surface.vertex_of(t, c) == v:
                    pz = phi(surface.corners(t)[c])
                    if all(abs(pz - s) > 1e-9 for s in spots):
                        spots.append(pz)
        for pz in spots:
            if min(abs(pz - w) for w in poly) < 1e-12:
                continue
            if winding_number(poly, pz) != 0:
                inside.add(v)
                break
    return inside


# -- the (P1)(P2)(P3) property report ----------------------------------------------


def property_report(cover: CoverMap, grid: int = 8, near_tol: float = 1e-3,
                    dias_bound: float | None = None) -> dict:
    """Check the three geometric properties of the deformed doubled triangle.

    P1 compares each pointed punctured systole with twice the minimal
    vertex distance, P2 checks the marked cone angles against pi, and P3
    shoots for short closed geodesics on a simply connected development
    piece of the torus cover (heuristic: labeled as such).
    """
    sphere = cover.sphere
    delta = min_vertex_distance(sphere)
    p1_values = []
    p1_flags = []
    for i in range(3):
        try:
            value, _ = pointed_systole_punctured(cover, i)
            p1_values.append(value)
            p1_flags.append(bool(value < 2.0 * delta))
        except SearchExhausted:
            p1_values.append(None)
            p1_flags.append(False)

    angles = [sphere.cone_angle(v) for v in sphere.marked]
    p2 = all(a < math.pi for a in angles)

    if dias_bound is None:
        finite = [v for v in p1_values if v is not None]
        dias_bound = min(finite) if finite else 2.0 * delta
    p3_bound = 3.0 * dias_bound
    piece = universal_cover_piece(cover.torus, radius=p3_bound * 1.05,
                                  cocycle=cover.cocycle)
    hits = closed_geodesic_search(piece.piece, p3_bound, grid, near_tol=near_tol)
    p3 = len(hits) == 0

    return {
        "P1": p1_flags,
        "P1_values": p1_values,
        "P2": p2,
        "P3_heuristic": p3,
        "P3_bound": p3_bound,
        "delta": delta,
        "marked_angles": angles,
    }
