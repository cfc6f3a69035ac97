"""Small planar helpers shared by the geometry modules.

Points are complex numbers (x + iy) internally; public APIs convert
to/from (x, y) pairs at the boundary.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

XY = tuple[float, float]


def to_z(p) -> complex:
    if isinstance(p, complex):
        return p
    x, y = p
    return complex(x, y)


def to_xy(z: complex) -> XY:
    return (z.real, z.imag)


def cross(u: complex, v: complex) -> float:
    return u.real * v.imag - u.imag * v.real


def dot(u: complex, v: complex) -> float:
    return u.real * v.real + u.imag * v.imag


@dataclass(frozen=True)
class Isometry:
    """Orientation-preserving plane isometry z -> a*z + b with |a| = 1."""

    a: complex
    b: complex

    @staticmethod
    def identity() -> "Isometry":
        return Isometry(1.0 + 0.0j, 0.0j)

    @staticmethod
    def rotation(angle: float, center: complex = 0.0j) -> "Isometry":
        a = cmath.exp(1j * angle)
        return Isometry(a, center - a * center)

    def __call__(self, z: complex) -> complex:
        return self.a * z + self.b

    def apply_vector(self, v: complex) -> complex:
        return self.a * v

    def compose(self, other: "Isometry") -> "Isometry":
        # self after other: z -> self(other(z)); renormalize to curb drift
        a = self.a * other.a
        a /= abs(a)
        return Isometry(a, self.a * other.b + self.b)

    def inverse(self) -> "Isometry":
        ai = 1.0 / self.a
        ai /= abs(ai)
        return Isometry(ai, -ai * self.b)

    def is_translation(self, tol: float = 1e-9) -> bool:
        return abs(self.a - 1.0) <= tol

    def fixed_point(self) -> complex:
        """Fixed point of a non-translation isometry."""
        if abs(self.a - 1.0) < 1e-14:
            raise ValueError("translation has no fixed point")
        return self.b / (1.0 - self.a)


def seg_point_distance(p: complex, a: complex, b: complex) -> float:
    """Distance from p to segment [a, b]."""
    ab = b - a
    denom = dot(ab, ab)
    if denom == 0.0:
        return abs(p - a)
    t = dot(p - a, ab) / denom
    t = min(1.0, max(0.0, t))
    return abs(p - (a + t * ab))


def segments_intersect(p1: complex, p2: complex, q1: complex, q2: complex,
                       eps: float = 1e-12):
    """Transverse interior intersection of two open segments.

    Returns (s, t) parameters in (0, 1) x (0, 1) or None.  Touching at
    endpoints or collinear overlap does not count as transverse.
    """
    d1 = p2 - p1
    d2 = q2 - q1
    denom = cross(d1, d2)
    scale = max(abs(d1), abs(d2), 1e-300)
    if abs(denom) <= eps * scale * scale:
        return None
    w = q1 - p1
    s = cross(w, d2) / denom
    t = cross(w, d1) / denom
    lo, hi = eps, 1.0 - eps
    if lo < s < hi and lo < t < hi:
        return (s, t)
    return None


def winding_number(polygon: list[complex], p: complex) -> int:
    """Winding number of a closed polyline around p (p off the curve)."""
    total = 0.0
    n = len(polygon)
    for i in range(n):
        a = polygon[i] - p
        b = polygon[(i + 1) % n] - p
        total += math.atan2(cross(a, b), dot(a, b))
    return int(round(total / (2.0 * math.pi)))


def convex_hull(points: list[complex]) -> list[complex]:
    """Andrew's monotone chain; returns CCW hull without collinear points."""
    pts = sorted(set((z.real, z.imag) for z in points))
    if len(pts) <= 2:
        return [complex(x, y) for x, y in pts]

    def half(seq):
        out: list[tuple[float, float]] = []
        for p in seq:
            while len(out) >= 2:
                a, b = out[-2], out[-1]
                if (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) > 1e-12:
                    break
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(reversed(pts))
    hull = lower[:-1] + upper[:-1]
    return [complex(x, y) for x, y in hull]
