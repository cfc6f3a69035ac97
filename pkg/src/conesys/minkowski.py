"""Convex-geometry kernel for 2-D Minkowski norms.

A norm is represented either by a symmetric positive definite Gram
matrix (quadratic norms, unit disk an ellipse) or by the vertex list of
a centrally symmetric convex polygon (unit disk the polygon itself).
Polygon polarity is computed exactly edge-by-edge so that products like
the Mahler volume come out sharp for parallelograms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_VERTEX_TOL = 1e-9  # relative vertex-coordinate tolerance for polygon equality


class NormError(ValueError):
    """Raised when norm data violates a construction invariant."""


@dataclass(frozen=True)
class Norm2D:
    """A centrally symmetric convex norm on the plane.

    kind is "quadratic" (gram holds the 2x2 matrix of the squared norm)
    or "polygon" (vertices holds the CCW unit-disk vertex list).
    """

    kind: str
    gram: np.ndarray | None = None
    vertices: np.ndarray | None = None
    # polygon only: vertices of the polar dual, one per edge (cached)
    _dual_vertices: np.ndarray | None = field(default=None, repr=False)

    @staticmethod
    def quadratic(gram) -> "Norm2D":
        g = np.asarray(gram, dtype=float)
        if g.shape != (2, 2):
            raise NormError("gram matrix must be 2x2")
        if abs(g[0, 1] - g[1, 0]) > 1e-12 * (1.0 + abs(g).max()):
            raise NormError("gram matrix must be symmetric")
        g = 0.5 * (g + g.T)
        if g[0, 0] <= 0 or np.linalg.det(g) <= 0:
            raise NormError("gram matrix must be positive definite")
        g.setflags(write=False)
        return Norm2D(kind="quadratic", gram=g)

    @staticmethod
    def polygon(vertices) -> "Norm2D":
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 4:
            raise NormError("polygon needs at least 4 plane vertices")
        n = v.shape[0]
        if n % 2 != 0:
            raise NormError("centrally symmetric polygon needs an even vertex count")
        scale = float(np.abs(v).max())
        if not np.allclose(v[: n // 2], -v[n // 2:], atol=_VERTEX_TOL * scale):
            raise NormError("vertex set is not centrally symmetric (v[i+n/2] must be -v[i])")
        # strict convexity and CCW order
        for i in range(n):
            a = v[i]
            b = v[(i + 1) % n]
            c = v[(i + 2) % n]
            turn = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            if turn <= 1e-12 * scale * scale:
                raise NormError("vertices must be in strictly convex CCW position "
                                f"(failure at index {i})")
        if _shoelace(v) <= 0:
            raise NormError("polygon encloses no area")
        dual = _edge_duals(v)
        v.setflags(write=False)
        dual.setflags(write=False)
        return Norm2D(kind="polygon", vertices=v, _dual_vertices=dual)

    @staticmethod
    def euclidean() -> "Norm2D":
        return Norm2D.quadratic(np.eye(2))

    def is_quadratic(self) -> bool:
        return self.kind == "quadratic"

    def rotated(self, angle: float) -> "Norm2D":
        """Norm of the unit disk rotated by `angle` (chart changes)."""
        c, s = math.cos(angle), math.sin(angle)
        r = np.array([[c, -s], [s, c]])
        if self.is_quadratic():
            return Norm2D.quadratic(r @ self.gram @ r.T)
        return Norm2D.polygon(self.vertices @ r.T)

    def to_json(self) -> dict:
        if self.is_quadratic():
            return {"kind": "quadratic", "gram": [list(map(float, row)) for row in self.gram]}
        return {"kind": "polygon", "vertices": [list(map(float, v)) for v in self.vertices]}

    @staticmethod
    def from_json(obj: dict) -> "Norm2D":
        if obj["kind"] == "quadratic":
            return Norm2D.quadratic(obj["gram"])
        if obj["kind"] == "polygon":
            return Norm2D.polygon(obj["vertices"])
        raise NormError(f"unknown norm kind {obj['kind']!r}")


def _shoelace(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _edge_duals(v: np.ndarray) -> np.ndarray:
    """Polar-dual vertices, one per edge of the CCW polygon v.

    The edge from v[i] to v[i+1] lies on the support line <x, o> = h with
    o the outward normal; the corresponding dual vertex is o / h.
    """
    nxt = np.roll(v, -1, axis=0)
    e = nxt - v
    o = np.stack([e[:, 1], -e[:, 0]], axis=1)
    h = np.einsum("ij,ij->i", v, o)
    if np.any(h <= 0):
        raise NormError("polygon does not contain the origin in its interior")
    return o / h[:, None]


def eval_norm(norm: Norm2D, v) -> float:
    """Gauge of the unit disk: minimal t >= 0 with v in t*B."""
    w = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(w)):
        raise ValueError("vector must be finite")
    if norm.is_quadratic():
        return float(math.sqrt(max(0.0, w @ norm.gram @ w)))
    # gauge = support function of the polar body = max over dual vertices
    return float(np.max(norm._dual_vertices @ w))


def eval_norm_many(norm: Norm2D, vs: np.ndarray) -> np.ndarray:
    """Vectorized eval_norm over an (n, 2) array."""
    vs = np.asarray(vs, dtype=float)
    if norm.is_quadratic():
        q = np.einsum("ij,jk,ik->i", vs, norm.gram, vs)
        return np.sqrt(np.maximum(q, 0.0))
    return np.max(vs @ norm._dual_vertices.T, axis=1)


def polar_dual(norm: Norm2D) -> Norm2D:
    """Norm whose unit disk is the polar body B* = {y : <x,y> <= 1 on B}."""
    if norm.is_quadratic():
        return Norm2D.quadratic(np.linalg.inv(norm.gram))
    return Norm2D.polygon(norm._dual_vertices)


def ball_area(norm: Norm2D) -> float:
    """Lebesgue area of the unit disk."""
    if norm.is_quadratic():
        return math.pi / math.sqrt(float(np.linalg.det(norm.gram)))
    return _shoelace(norm.vertices)


def mahler_product(norm: Norm2D) -> float:
    """|B| * |B*|; lies in [8, pi^2] for symmetric planar bodies."""
    return ball_area(norm) * ball_area(polar_dual(norm))


@dataclass(frozen=True)
class AreaDensities:
    """Finsler area per unit Lebesgue area for a constant norm."""

    holmes_thompson: float
    busemann_hausdorff: float


def area_densities(norm: Norm2D) -> AreaDensities:
    """Holmes-Thompson |B*|/pi and Busemann-Hausdorff pi/|B| densities."""
    ht = ball_area(polar_dual(norm)) / math.pi
    bh = math.pi / ball_area(norm)
    return AreaDensities(holmes_thompson=ht, busemann_hausdorff=bh)


def norms_close(a: Norm2D, b: Norm2D, tol: float = _VERTEX_TOL) -> bool:
    """Equality up to tolerance; polygons compared up to cyclic rotation."""
    if a.kind != b.kind:
        return False
    if a.is_quadratic():
        scale = 1.0 + max(np.abs(a.gram).max(), np.abs(b.gram).max())
        return bool(np.allclose(a.gram, b.gram, atol=tol * scale))
    va, vb = a.vertices, b.vertices
    if va.shape != vb.shape:
        return False
    scale = max(np.abs(va).max(), np.abs(vb).max())
    for shift in range(len(vb)):
        if np.allclose(va, np.roll(vb, -shift, axis=0), atol=tol * scale):
            return True
    return False


def calabi_croke_norm() -> Norm2D:
    """Parallelogram unit disk with vertices a/2, b/2, -a/2, -b/2 for the
    hexagonal basis a = (1, 0), b = (1/2, sqrt(3)/2)."""
    a = np.array([1.0, 0.0]) / 2.0
    b = np.array([0.5, math.sqrt(3.0) / 2.0]) / 2.0
    return Norm2D.polygon([a, b, -a, -b])


def square_norm(half_width: float = 1.0) -> Norm2D:
    """Sup-norm scaled so the unit disk is the square [-h, h]^2."""
    h = float(half_width)
    return Norm2D.polygon([(h, h), (-h, h), (-h, -h), (h, -h)])
