"""Triangulated piecewise-flat surfaces with conical singularities.

A surface is a list of metric triangles (edge lengths only) plus a
gluing table pairing triangle edges.  Every triangle carries a canonical
chart: corner 0 at the origin, corner 1 on the positive x-axis, corner 2
in the upper half plane; edge e runs from corner e to corner e+1.  All
gluings are orientation-reversing along the shared edge (corner e maps
to corner e'+1), which makes every surface built here orientable.

The module also builds the doubled-triangle sphere, flat tori, the
degree-3 ramified cover of a marked sphere (three labeled copies glued
across two cut arcs), midpoint refinement, deterministic edge-length
perturbations, and simply connected development pieces of the universal
cover of a torus.
"""

from __future__ import annotations

import cmath
import math
import random
from dataclasses import dataclass
from heapq import heappop, heappush

from .minkowski import Norm2D, area_densities, norms_close
from .planar import Isometry, cross

SQRT3 = math.sqrt(3.0)
_LEN_TOL = 1e-12  # relative tolerance for glued edge lengths


class SurfaceError(ValueError):
    pass


def _corner_id(t: int, c: int) -> int:
    return 3 * t + c


class ConeSurface:
    """Immutable piecewise-flat surface; see the module docstring."""

    def __init__(self, lengths, gluings, norms=None, marked_corners=None,
                 allow_boundary: bool = False, refine_level: int | None = 0):
        self.lengths: tuple[tuple[float, float, float], ...] = tuple(
            (float(a), float(b), float(c)) for a, b, c in lengths)
        self.norms: tuple[Norm2D | None, ...] = tuple(norms) if norms is not None \
            else (None,) * len(self.lengths)
        if len(self.norms) != len(self.lengths):
            raise SurfaceError("one norm entry per triangle required")
        self.allow_boundary = bool(allow_boundary)
        self.refine_level = refine_level

        glue: dict[tuple[int, int], tuple[int, int]] = {}
        for (t, e), (t2, e2) in dict(gluings).items():
            glue[(t, e)] = (t2, e2)
            glue[(t2, e2)] = (t, e)
        self.gluing = glue

        self._validate_triangles()
        self._charts = [self._chart(t) for t in range(self.n_triangles)]
        self._validate_gluings()
        self._build_vertices()
        self._transitions: dict[tuple[int, int], Isometry] = {}

        if marked_corners is None:
            self.marked: tuple[int, ...] = ()
        else:
            self.marked = tuple(self.vertex_of(t, c) for t, c in marked_corners)

    # -- construction helpers -------------------------------------------------

    @property
    def n_triangles(self) -> int:
        return len(self.lengths)

    def _validate_triangles(self) -> None:
        for t, (a, b, c) in enumerate(self.lengths):
            if min(a, b, c) <= 0:
                raise SurfaceError(f"triangle {t} has a non-positive edge")
            p = a + b + c
            if a + b - c <= _LEN_TOL * p or b + c - a <= _LEN_TOL * p \
                    or c + a - b <= _LEN_TOL * p:
                raise SurfaceError(f"triangle {t} violates the strict triangle inequality")

    def _chart(self, t: int) -> tuple[complex, complex, complex]:
        l0, l1, l2 = self.lengths[t]
        x = (l0 * l0 + l2 * l2 - l1 * l1) / (2.0 * l0)
        y2 = l2 * l2 - x * x
        y = math.sqrt(max(y2, 0.0))
        return (0.0j, complex(l0, 0.0), complex(x, y))

    def _validate_gluings(self) -> None:
        for (t, e), (t2, e2) in self.gluing.items():
            if not (0 <= t < self.n_triangles and 0 <= e < 3):
                raise SurfaceError(f"gluing refers to missing edge ({t},{e})")
            if self.gluing.get((t2, e2)) != (t, e):
                raise SurfaceError("gluing table is not an involution")
            la = self.lengths[t][e]
            lb = self.lengths[t2][e2]
            if abs(la - lb) > _LEN_TOL * max(la, lb):
                raise SurfaceError(f"glued edges ({t},{e})~({t2},{e2}) differ in length")
        if not self.allow_boundary:
            for t in range(self.n_triangles):
                for e in range(3):
                    if (t, e) not in self.gluing:
                        raise SurfaceError(f"edge ({t},{e}) is unglued on a closed surface")

    def _build_vertices(self) -> None:
        n = 3 * self.n_triangles
        parent = list(range(n))

        def find(i: int) -> int:
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        def union(i: int, j: int) -> None:
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)

        for (t, e), (t2, e2) in self.gluing.items():
            union(_corner_id(t, e), _corner_id(t2, (e2 + 1) % 3))
            union(_corner_id(t, (e + 1) % 3), _corner_id(t2, e2))

        roots = sorted({find(i) for i in range(n)})
        index = {r: k for k, r in enumerate(roots)}
        self._corner_vertex = [index[find(i)] for i in range(n)]
        members: list[list[tuple[int, int]]] = [[] for _ in roots]
        for t in range(self.n_triangles):
            for c in range(3):
                members[self._corner_vertex[_corner_id(t, c)]].append((t, c))
        self.vertex_corners: tuple[tuple[tuple[int, int], ...], ...] = tuple(
            tuple(m) for m in members)

    # -- basic queries ---------------------------------------------------------

    def corners(self, t: int) -> tuple[complex, complex, complex]:
        return self._charts[t]

    def edge_endpoints(self, t: int, e: int) -> tuple[complex, complex]:
        ch = self._charts[t]
        return ch[e], ch[(e + 1) % 3]

    def vertex_of(self, t: int, c: int) -> int:
        return self._corner_vertex[_corner_id(t, c)]

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_corners)

    def corner_angle(self, t: int, c: int) -> float:
        l = self.lengths[t]
        adj1, adj2, opp = l[c], l[(c + 2) % 3], l[(c + 1) % 3]
        cosv = (adj1 * adj1 + adj2 * adj2 - opp * opp) / (2.0 * adj1 * adj2)
        return math.acos(min(1.0, max(-1.0, cosv)))

    def cone_angle(self, vertex: int) -> float:
        return sum(self.corner_angle(t, c) for t, c in self.vertex_corners[vertex])

    def cone_angles(self) -> list[float]:
        return [self.cone_angle(v) for v in range(self.n_vertices)]

    def is_flat(self, tol: float = 1e-9) -> bool:
        return all(abs(a - 2.0 * math.pi) <= tol for a in self.cone_angles())

    def boundary_edges(self) -> list[tuple[int, int]]:
        return [(t, e) for t in range(self.n_triangles) for e in range(3)
                if (t, e) not in self.gluing]

    def euler_characteristic(self) -> int:
        f = self.n_triangles
        n_glued = len(self.gluing) // 2
        n_edges = n_glued + len(self.boundary_edges())
        return self.n_vertices - n_edges + f

    def triangle_area(self, t: int) -> float:
        _, p1, p2 = self._charts[t]
        return 0.5 * abs(cross(p1, p2))

    def area_euclidean(self) -> float:
        return sum(self.triangle_area(t) for t in range(self.n_triangles))

    def area(self, convention: str = "euclidean") -> float:
        """Surface area; Finsler conventions weight each chart by its density."""
        if convention == "euclidean":
            return self.area_euclidean()
        total = 0.0
        for t in range(self.n_triangles):
            norm = self.norms[t]
            w = 1.0
            if norm is not None:
                d = area_densities(norm)
                w = d.holmes_thompson if convention in ("HolmesThompson", "ht") \
                    else d.busemann_hausdorff
            total += self.triangle_area(t) * w
        return total

    def transition(self, t: int, e: int) -> Isometry:
        """Isometry placing the partner chart across edge e into t's chart."""
        key = (t, e)
        iso = self._transitions.get(key)
        if iso is None:
            t2, e2 = self.gluing[key]
            p_e, p_e1 = self.edge_endpoints(t, e)
            q_e, q_e1 = self.edge_endpoints(t2, e2)
            a = (p_e - p_e1) / (q_e1 - q_e)
            a /= abs(a)
            iso = Isometry(a, p_e1 - a * q_e)
            self._transitions[key] = iso
        return iso

    def next_corner_ccw(self, t: int, c: int) -> tuple[int, int]:
        """Next corner rotating counterclockwise around the vertex of (t, c)."""
        e = (c + 2) % 3
        t2, e2 = self.gluing[(t, e)]
        return (t2, e2)

    # -- serialization ---------------------------------------------------------

    def to_json(self) -> dict:
        tris = []
        for t in range(self.n_triangles):
            norm = self.norms[t]
            tris.append({"lengths": list(self.lengths[t]),
                         "norm": None if norm is None else norm.to_json()})
        glu = []
        for (t, e), (t2, e2) in sorted(self.gluing.items()):
            if (t, e) < (t2, e2) or ((t, e) == (t2, e2)):
                glu.append([t, e, t2, e2, -1])
        return {"triangles": tris, "gluings": glu, "marked": list(self.marked)}

    @staticmethod
    def from_json(obj: dict, allow_boundary: bool = False) -> "ConeSurface":
        lengths = [tuple(tr["lengths"]) for tr in obj["triangles"]]
        norms = [None if tr.get("norm") is None else Norm2D.from_json(tr["norm"])
                 for tr in obj["triangles"]]
        gluings = {}
        for t, e, t2, e2, orient in obj["gluings"]:
            if orient != -1:
                raise SurfaceError("only orientation-reversing gluings are supported")
            gluings[(t, e)] = (t2, e2)
        surf = ConeSurface(lengths, gluings, norms=norms,
                           allow_boundary=allow_boundary, refine_level=None)
        marked = obj.get("marked") or []
        surf.marked = tuple(int(v) for v in marked)
        if any(not 0 <= v < surf.n_vertices for v in surf.marked):
            raise SurfaceError("marked vertex id out of range")
        return surf

    def same_geometry(self, other: "ConeSurface") -> bool:
        return self.lengths == other.lengths and self.gluing == other.gluing \
            and self.marked == other.marked


# -- builders ------------------------------------------------------------------


def build_calabi_croke(side: float = 1.0) -> ConeSurface:
    """Two equilateral triangles glued along their boundaries.

    Triangle 0 reads its corners as (v1, v2, v3) and triangle 1 as
    (v1, v3, v2); the double then has the three marked vertices with
    cone angle 2*pi/3 each.
    """
    if not side > 0:
        raise SurfaceError("side must be positive")
    s = float(side)
    lengths = [(s, s, s), (s, s, s)]
    gluings = {(0, 0): (1, 2), (0, 1): (1, 1), (0, 2): (1, 0)}
    return ConeSurface(lengths, gluings,
                       marked_corners=[(0, 0), (0, 1), (0, 2)], refine_level=0)


def build_flat_torus_surface(lattice, norm: Norm2D | None = None) -> ConeSurface:
    """Fundamental parallelogram of the lattice split along a diagonal.

    The single vertex is smooth (cone angle 2*pi).  A constant plane norm
    is rotated into each triangle's canonical chart.
    """
    ax, ay = lattice.basis_a
    bx, by = lattice.basis_b
    if ax * by - ay * bx < 0:
        bx, by = -bx, -by
    a = complex(ax, ay)
    b = complex(bx, by)
    la, lb, ld = abs(a), abs(b), abs(a + b)
    lengths = [(la, lb, ld), (ld, la, lb)]
    gluings = {(0, 0): (1, 1), (0, 1): (1, 2), (0, 2): (1, 0)}
    norms = None
    if norm is not None:
        norms = [norm.rotated(-cmath.phase(a)), norm.rotated(-cmath.phase(a + b))]
    return ConeSurface(lengths, gluings, norms=norms, refine_level=0)


def refine(surface: ConeSurface, levels: int) -> ConeSurface:
    """Flat 4-fold midpoint subdivision, `levels` times.

    Geometry is unchanged: child lengths are half the parent lengths in
    the parent chart, so areas, cone angles and geodesics are preserved.
    """
    if levels < 0:
        raise SurfaceError("levels must be >= 0")
    out = surface
    for _ in range(levels):
        out = _refine_once(out)
    return out


def _refine_once(surface: ConeSurface) -> ConeSurface:
    lengths = []
    norms = []
    for t in range(surface.n_triangles):
        l0, l1, l2 = surface.lengths[t]
        h0, h1, h2 = l0 / 2.0, l1 / 2.0, l2 / 2.0
        # children: per-corner triangles then the medial triangle
        lengths.extend([(h0, h1, h2), (h1, h2, h0), (h2, h0, h1), (h2, h0, h1)])
        norm = surface.norms[t]
        if norm is None:
            norms.extend([None, None, None, None])
        else:
            ch = surface.corners(t)
            m = [(ch[e] + ch[(e + 1) % 3]) / 2.0 for e in range(3)]
            angles = [0.0,
                      cmath.phase(m[1] - ch[1]),
                      cmath.phase(m[2] - ch[2]),
                      cmath.phase(m[1] - m[0])]
            norms.extend(norm.rotated(-ang) if ang != 0.0 else norm for ang in angles)

    gluings: dict[tuple[int, int], tuple[int, int]] = {}
    for t in range(surface.n_triangles):
        # medial triangle against the three corner children
        gluings[(4 * t + 3, 0)] = (4 * t + 1, 1)
        gluings[(4 * t + 3, 1)] = (4 * t + 2, 1)
        gluings[(4 * t + 3, 2)] = (4 * t + 0, 1)
    for (t, e), (t2, e2) in surface.gluing.items():
        if (t, e) > (t2, e2):
            continue
        # halves of a glued edge pair up crosswise
        gluings[(4 * t + e, 0)] = (4 * t2 + (e2 + 1) % 3, 2)
        gluings[(4 * t + (e + 1) % 3, 2)] = (4 * t2 + e2, 0)
    for (t, e) in surface.boundary_edges():
        pass  # boundary halves stay unglued

    marked_corners = None
    if surface.marked:
        reps = []
        for v in surface.marked:
            t, c = surface.vertex_corners[v][0]
            reps.append((4 * t + c, 0))
        marked_corners = reps
    level = None if surface.refine_level is None else surface.refine_level + 1
    return ConeSurface(lengths, gluings, norms=norms, marked_corners=marked_corners,
                       allow_boundary=surface.allow_boundary, refine_level=level)


def perturb(surface: ConeSurface, seed: int, magnitude: float,
            preserve_marked_angles: bool = True) -> ConeSurface:
    """Deterministic multiplicative perturbation of edge lengths.

    Factors are drawn uniformly from [1 - magnitude, 1 + magnitude] with
    a fixed Mersenne-Twister stream; a draw violating the strict triangle
    inequality anywhere is rejected and redrawn as a whole.  When
    preserve_marked_angles is set, every edge of every triangle touching
    a marked vertex is left unchanged, which keeps the marked cone angles
    exactly (a corner angle depends on all three edges of its triangle).
    """
    if not 0.0 <= magnitude < 0.2:
        raise SurfaceError("magnitude must lie in [0, 0.2)")
    if surface.refine_level is None or surface.refine_level < 1:
        raise SurfaceError("perturb requires a surface refined at least once")
    if magnitude == 0.0:
        return surface

    frozen_triangles: set[int] = set()
    if preserve_marked_angles and surface.marked:
        for v in surface.marked:
            for t, _ in surface.vertex_corners[v]:
                frozen_triangles.add(t)

    edges = sorted((t, e) for (t, e), (t2, e2) in surface.gluing.items()
                   if (t, e) <= (t2, e2))
    free = [key for key in edges
            if key[0] not in frozen_triangles
            and surface.gluing[key][0] not in frozen_triangles]

    rng = random.Random(seed)
    for _attempt in range(1000):
        factors = {key: 1.0 + rng.uniform(-magnitude, magnitude) for key in free}
        new_lengths = [list(l) for l in surface.lengths]
        for (t, e), f in factors.items():
            t2, e2 = surface.gluing[(t, e)]
            new_lengths[t][e] *= f
            new_lengths[t2][e2] = new_lengths[t][e]
        if _all_triangles_valid(new_lengths):
            marked_corners = [surface.vertex_corners[v][0] for v in surface.marked] \
                if surface.marked else None
            return ConeSurface([tuple(l) for l in new_lengths], surface.gluing,
                               norms=surface.norms, marked_corners=marked_corners,
                               allow_boundary=surface.allow_boundary,
                               refine_level=surface.refine_level)
    raise SurfaceError("could not draw a valid perturbation (triangle inequality)")


def _all_triangles_valid(lengths) -> bool:
    for a, b, c in lengths:
        p = a + b + c
        if a + b - c <= 1e-9 * p or b + c - a <= 1e-9 * p or c + a - b <= 1e-9 * p:
            return False
    return True


# -- the degree-3 ramified cover -------------------------------------------------


@dataclass(frozen=True)
class CoverMap:
    """Degree-3 cover torus -> sphere ramified over the three marked vertices.

    Torus triangle k*F + t is copy k of sphere triangle t (identical
    chart), the deck map rho shifts copies, and the ramification vertex
    over marked vertex i is ramification_vertices[i].
    """

    sphere: ConeSurface
    torus: ConeSurface
    ramification_vertices: tuple[int, int, int]
    cut_arcs: tuple[tuple[tuple[int, int], ...], tuple[tuple[int, int], ...]]
    cocycle: dict

    @property
    def n_sphere_triangles(self) -> int:
        return self.sphere.n_triangles

    def project_triangle(self, torus_tri: int) -> int:
        return torus_tri % self.n_sphere_triangles

    def copy_index(self, torus_tri: int) -> int:
        return torus_tri // self.n_sphere_triangles

    def lift_triangle(self, sphere_tri: int, copy: int) -> int:
        return (copy % 3) * self.n_sphere_triangles + sphere_tri

    def deck_triangle(self, torus_tri: int) -> int:
        f = self.n_sphere_triangles
        return ((torus_tri // f + 1) % 3) * f + torus_tri % f

    def deck_vertex_permutation(self) -> list[int]:
        perm = [-1] * self.torus.n_vertices
        for v, corners in enumerate(self.torus.vertex_corners):
            t, c = corners[0]
            perm[v] = self.torus.vertex_of(self.deck_triangle(t), c)
        return perm

    def deck_fixed_vertices(self) -> list[int]:
        return [v for v, w in enumerate(self.deck_vertex_permutation()) if v == w]


def _skeleton_shortest_arc(surface: ConeSurface, src: int, dst: int,
                           blocked: set[int]) -> list[tuple[int, int]] | None:
    """Dijkstra over the 1-skeleton; returns canonical edge keys of the path.

    Interior path vertices must avoid `blocked` (and dst must not be in it).
    """
    adj: dict[int, list[tuple[float, int, tuple[int, int]]]] = {}
    seen = set()
    for (t, e), (t2, e2) in surface.gluing.items():
        key = min((t, e), (t2, e2))
        if key in seen:
            continue
        seen.add(key)
        va = surface.vertex_of(t, e)
        vb = surface.vertex_of(t, (e + 1) % 3)
        if va == vb:
            continue
        ln = surface.lengths[t][e]
        adj.setdefault(va, []).append((ln, vb, key))
        adj.setdefault(vb, []).append((ln, va, key))

    dist = {src: 0.0}
    prev: dict[int, tuple[int, tuple[int, int]]] = {}
    heap = [(0.0, src)]
    while heap:
        d, v = heappop(heap)
        if d > dist.get(v, math.inf):
            continue
        if v == dst:
            break
        for ln, w, key in adj.get(v, ()):
            if w != dst and w in blocked:
                continue
            nd = d + ln
            if nd < dist.get(w, math.inf) - 1e-15:
                dist[w] = nd
                prev[w] = (v, key)
                heappush(heap, (nd, w))
    if dst not in prev and src != dst:
        return None
    path = []
    v = dst
    while v != src:
        u, key = prev[v]
        path.append(key)
        v = u
    path.reverse()
    return path


def _arc_left_sides(surface: ConeSurface, src: int,
                    arc_keys: list[tuple[int, int]]) -> list[tuple[int, int]]:
    """For each arc edge (walked away from src) the triangle side on its left."""
    sides = []
    current = src
    for (t, e) in arc_keys:
        va = surface.vertex_of(t, e)
        vb = surface.vertex_of(t, (e + 1) % 3)
        if va == current:
            sides.append((t, e))       # t sits left of corner e -> e+1
            current = vb
        elif vb == current:
            sides.append(surface.gluing[(t, e)])
            current = va
        else:
            raise SurfaceError("cut arc is not a connected vertex path")
    return sides


def ramified_cover(sphere: ConeSurface) -> CoverMap:
    """Degree-3 cover of a marked sphere, branched over the marked vertices.

    The sphere is cut along two vertex-disjoint skeleton arcs joining
    marked vertex 1 to vertices 2 and 3; three labeled copies are glued
    so that crossing either arc from its left to its right raises the
    copy index by one.  Around each marked vertex the total monodromy is
    then a 3-cycle, so the glued surface is a torus and the cone angle at
    each ramification point triples.
    """
    if sphere.euler_characteristic() != 2:
        raise SurfaceError("ramified_cover expects a sphere (Euler characteristic 2)")
    if len(sphere.marked) != 3:
        raise SurfaceError("ramified_cover needs exactly 3 marked vertices")
    x1, x2, x3 = sphere.marked

    arc2 = _skeleton_shortest_arc(sphere, x1, x2, blocked={x3})
    if arc2 is None:
        raise SurfaceError("no cut arc from vertex 1 to vertex 2")
    arc2_vertices = set()
    cur = x1
    for (t, e) in arc2:
        va, vb = sphere.vertex_of(t, e), sphere.vertex_of(t, (e + 1) % 3)
        cur = vb if va == cur else va
        arc2_vertices.add(cur)
    arc2_vertices.discard(x2)
    arc3 = _skeleton_shortest_arc(sphere, x1, x3, blocked=arc2_vertices | {x2})
    if arc3 is None:
        raise SurfaceError("refinement incompatible with the two cut arcs "
                           "(no disjoint second arc)")

    left2 = dict(zip(arc2, _arc_left_sides(sphere, x1, arc2)))
    left3 = dict(zip(arc3, _arc_left_sides(sphere, x1, arc3)))
    cut_left = {**{k: left2[k] for k in arc2}, **{k: left3[k] for k in arc3}}

    f = sphere.n_triangles
    lengths = []
    norms = []
    for k in range(3):
        lengths.extend(sphere.lengths)
        norms.extend(sphere.norms)

    gluings: dict[tuple[int, int], tuple[int, int]] = {}
    done = set()
    for (t, e), (t2, e2) in sphere.gluing.items():
        key = min((t, e), (t2, e2))
        if key in done:
            continue
        done.add(key)
        if key in cut_left:
            tl, el = cut_left[key]
            tr, er = sphere.gluing[(tl, el)]
            for k in range(3):
                gluings[(k * f + tl, el)] = (((k + 1) % 3) * f + tr, er)
        else:
            for k in range(3):
                gluings[(k * f + t, e)] = (k * f + t2, e2)

    torus = ConeSurface(lengths, gluings, norms=norms, refine_level=sphere.refine_level)
    if torus.euler_characteristic() != 0:
        raise SurfaceError("cover construction did not produce a torus")

    rami = []
    for xi in (x1, x2, x3):
        t, c = sphere.vertex_corners[xi][0]
        rami.append(torus.vertex_of(t, c))  # copy 0 lift
    for i, xi in enumerate((x1, x2, x3)):
        want = 3.0 * sphere.cone_angle(xi)
        got = torus.cone_angle(rami[i])
        if abs(want - got) > 1e-9 * max(1.0, want):
            raise SurfaceError("ramification cone angle did not triple")
    torus.marked = tuple(rami)

    cover = CoverMap(sphere=sphere, torus=torus,
                     ramification_vertices=tuple(rami),
                     cut_arcs=(tuple(arc2), tuple(arc3)),
                     cocycle=_torus_cocycle(torus))
    fixed = cover.deck_fixed_vertices()
    if sorted(fixed) != sorted(rami):
        raise SurfaceError("deck transformation does not fix exactly the ramification points")
    return cover


# -- integer homology cocycle and universal-cover pieces -------------------------


def _dual_spanning_tree(surface: ConeSurface) -> tuple[set, list]:
    """BFS spanning tree of the dual graph; returns (tree keys, non-tree keys)."""
    tree: set[tuple[int, int]] = set()
    nontree: list[tuple[int, int]] = []
    visited = {0}
    queue = [0]
    seen_edges = set()
    while queue:
        t = queue.pop(0)
        for e in range(3):
            if (t, e) not in surface.gluing:
                continue
            t2, e2 = surface.gluing[(t, e)]
            key = min((t, e), (t2, e2))
            if key in seen_edges:
                continue
            seen_edges.add(key)
            if t2 not in visited:
                visited.add(t2)
                tree.add(key)
                queue.append(t2)
            else:
                nontree.append(key)
    if len(visited) != surface.n_triangles:
        raise SurfaceError("surface is not connected")
    return tree, sorted(nontree)


def _vertex_star_relations(surface: ConeSurface, nontree_index: dict) -> list[list[int]]:
    k = len(nontree_index)
    relations = []
    for corners in surface.vertex_corners:
        rel = [0] * k
        t, c = corners[0]
        start = (t, c)
        cur = start
        while True:
            t0, c0 = cur
            e = (c0 + 2) % 3
            t2, e2 = surface.gluing[(t0, e)]
            key = min((t0, e), (t2, e2))
            idx = nontree_index.get(key)
            if idx is not None:
                rel[idx] += 1 if key == (t0, e) else -1
            cur = (t2, e2)
            if cur == start:
                break
        relations.append(rel)
    return relations


def _free_quotient_projection(relations: list[list[int]], k: int):
    """Column-reduce the relation rows; return M with x -> (x @ M)[free_cols].

    The quotient Z^k / <relations> must be free; its rank is len(free_cols).
    """
    rows = [list(r) for r in relations]
    m = len(rows)
    mat = [list(r) for r in rows]
    M = [[1 if i == j else 0 for j in range(k)] for i in range(k)]

    def col_swap(i, j):
        for r in mat:
            r[i], r[j] = r[j], r[i]
        for r in M:
            r[i], r[j] = r[j], r[i]

    def col_add(i, j, q):
        # col_j += q * col_i
        for r in mat:
            r[j] += q * r[i]
        for r in M:
            r[j] += q * r[i]

    def col_neg(i):
        for r in mat:
            r[i] = -r[i]
        for r in M:
            r[i] = -r[i]

    rank = 0
    for p in range(min(m, k)):
        # pivot search
        pi, pj = -1, -1
        best = None
        for i in range(rank, m):
            for j in range(rank, k):
                v = abs(mat[i][j])
                if v and (best is None or v < best):
                    best, pi, pj = v, i, j
        if best is None:
            break
        mat[rank], mat[pi] = mat[pi], mat[rank]
        if pj != rank:
            col_swap(rank, pj)
        # clear row and column at the pivot
        while True:
            changed = False
            for i in range(m):
                if i != rank and mat[i][rank]:
                    q = mat[i][rank] // mat[rank][rank]
                    if q:
                        for j in range(k):
                            mat[i][j] -= q * mat[rank][j]
                        changed = True
                    if mat[i][rank]:
                        mat[rank], mat[i] = mat[i], mat[rank]
                        changed = True
            for j in range(k):
                if j != rank and mat[rank][j]:
                    q = mat[rank][j] // mat[rank][rank]
                    if q:
                        col_add(rank, j, -q)
                        changed = True
                    if mat[rank][j]:
                        col_swap(rank, j)
                        changed = True
            if not changed:
                break
        if mat[rank][rank] < 0:
            col_neg(rank)
        rank += 1

    for p in range(rank):
        if abs(mat[p][p]) != 1:
            raise SurfaceError("homology has torsion; not an orientable torus complex")
    free_cols = list(range(rank, k))
    return M, free_cols


def _torus_cocycle(torus: ConeSurface) -> dict:
    """Integer weights w(edge key) in Z^2 defining the universal Z^2-cover.

    Tree edges get weight zero; crossing a non-tree edge from its
    canonical side adds its weight.  Vertex stars sum to zero, so lifting
    the complex by these weights is an honest covering.
    """
    tree, nontree = _dual_spanning_tree(torus)
    nontree_index = {key: i for i, key in enumerate(nontree)}
    relations = _vertex_star_relations(torus, nontree_index)
    M, free_cols = _free_quotient_projection(relations, len(nontree))
    if len(free_cols) != 2:
        raise SurfaceError("universal-cover indexing needs first homology rank 2")
    weights = {}
    for key, i in nontree_index.items():
        # image of basis vector e_i: row i of M restricted to free columns
        weights[key] = (M[i][free_cols[0]], M[i][free_cols[1]])
    for key in tree:
        weights[key] = (0, 0)
    return weights


def edge_weight(cocycle: dict, t: int, e: int, t2: int, e2: int) -> tuple[int, int]:
    """Signed cocycle weight for crossing from (t, e) into (t2, e2)."""
    key = min((t, e), (t2, e2))
    w = cocycle[key]
    if key == (t, e):
        return w
    return (-w[0], -w[1])


@dataclass(frozen=True)
class CoverPiece:
    """Simply connected development piece of the universal cover of a torus."""

    piece: ConeSurface
    base_triangles: tuple[int, ...]          # piece tri -> torus tri
    sheet_indices: tuple[tuple[int, int], ...]
    placements: tuple[Isometry, ...]         # chart -> development plane


def universal_cover_piece(torus: ConeSurface, radius: float,
                          seed_triangle: int = 0,
                          cocycle: dict | None = None) -> CoverPiece:
    """Develop the Z^2-cover of a torus out to a given planar radius.

    Triangles are indexed by (torus triangle, sheet in Z^2); the piece is
    a simply connected complex with boundary, suitable for shooting
    geodesics that must not wrap around the torus.
    """
    if cocycle is None:
        cocycle = _torus_cocycle(torus)
    start = (seed_triangle, (0, 0))
    ch = torus.corners(seed_triangle)
    center = (ch[0] + ch[1] + ch[2]) / 3.0
    placements = {start: Isometry(1.0 + 0j, -center)}
    order = [start]
    queue = [start]
    while queue:
        state = queue.pop(0)
        t, (m, n) = state
        phi = placements[state]
        for e in range(3):
            if (t, e) not in torus.gluing:
                continue
            t2, e2 = torus.gluing[(t, e)]
            dm, dn = edge_weight(cocycle, t, e, t2, e2)
            nxt = (t2, (m + dm, n + dn))
            if nxt in placements:
                continue
            phi2 = phi.compose(torus.transition(t, e))
            cs = [phi2(z) for z in torus.corners(t2)]
            if min(abs(z) for z in cs) > radius:
                continue
            placements[nxt] = phi2
            order.append(nxt)
            queue.append(nxt)

    index = {state: i for i, state in enumerate(order)}
    lengths = [torus.lengths[t] for t, _ in order]
    norms = [torus.norms[t] for t, _ in order]
    gluings = {}
    for state, i in index.items():
        t, (m, n) = state
        for e in range(3):
            if (t, e) not in torus.gluing:
                continue
            t2, e2 = torus.gluing[(t, e)]
            dm, dn = edge_weight(cocycle, t, e, t2, e2)
            j = index.get((t2, (m + dm, n + dn)))
            if j is not None:
                gluings[(i, e)] = (j, e2)
    piece = ConeSurface(lengths, gluings, norms=norms, allow_boundary=True,
                        refine_level=None)
    return CoverPiece(piece=piece,
                      base_triangles=tuple(t for t, _ in order),
                      sheet_indices=tuple(sheet for _, sheet in order),
                      placements=tuple(placements[s] for s in order))


def holonomy_lattice(torus: ConeSurface, tol: float = 1e-9):
    """Deck-translation lattice of a flat torus, from development holonomy.

    Returns a Lattice2D, or None when the surface is not flat (a cone
    angle differs from 2*pi) or the holonomy has a rotational part.
    """
    from .flat_lattice import Lattice2D

    if not torus.is_flat(tol=1e-9):
        return None
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

    cocycle = _torus_cocycle(torus)
    vec: dict[tuple[int, int], complex] = {}
    for key in nontree:
        t, e = key
        t2, e2 = torus.gluing[key]
        delta = placements[t].compose(torus.transition(t, e)).compose(
            placements[t2].inverse())
        if abs(delta.a - 1.0) > tol:
            return None
        w = cocycle[key]
        vec[w] = delta.b
    # solve for the generator translations from the weighted discrepancies
    basis: dict[str, complex] = {}
    ws = list(vec.keys())
    for i in range(len(ws)):
        for j in range(i + 1, len(ws)):
            (m1, n1), (m2, n2) = ws[i], ws[j]
            det = m1 * n2 - n1 * m2
            if det != 0:
                va = (n2 * vec[ws[i]] - n1 * vec[ws[j]]) / det
                vb = (-m2 * vec[ws[i]] + m1 * vec[ws[j]]) / det
                basis["a"], basis["b"] = va, vb
                break
        if basis:
            break
    if not basis:
        return None
    va, vb = basis["a"], basis["b"]
    scale = max(abs(va), abs(vb))
    for (m, n), d in vec.items():
        if abs(m * va + n * vb - d) > 1e-7 * max(1.0, scale):
            return None
    return Lattice2D((va.real, va.imag), (vb.real, vb.imag))


def deck_invariance_check(norm: Norm2D, tol: float = 1e-9) -> dict:
    """Is the norm invariant under the order-3 deck rotation (angle 2*pi/3)?"""
    from .minkowski import eval_norm

    angle = 2.0 * math.pi / 3.0
    rotated = norm.rotated(angle)
    invariant = norms_close(norm, rotated, tol=tol)
    deviation = 0.0
    if norm.is_quadratic():
        import numpy as np
        deviation = float(abs(rotated.gram - norm.gram).max())
    else:
        c, s = math.cos(angle), math.sin(angle)
        for vx, vy in norm.vertices:
            image = (c * vx - s * vy, s * vx + c * vy)
            deviation = max(deviation, abs(eval_norm(norm, image) - 1.0))
    return {"invariant": bool(invariant), "max_deviation": deviation}
