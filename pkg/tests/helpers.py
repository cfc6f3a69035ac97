"""Shared test oracles and random-shape generators.

Everything here is deliberately independent of the package internals:
brute-force or closed-form computations used to freeze expected values.
"""

from __future__ import annotations

import math
import random

import numpy as np

from conesys.minkowski import Norm2D


def shoelace_oracle(vertices) -> float:
    v = list(vertices)
    s = 0.0
    for i in range(len(v)):
        x1, y1 = v[i]
        x2, y2 = v[(i + 1) % len(v)]
        s += x1 * y2 - x2 * y1
    return 0.5 * s


def gauge_oracle(vertices, v) -> float:
    """Gauge of a convex polygon by brute force over adjacent vertex pairs.

    Solves v = lam * w_i + mu * w_{i+1} with lam, mu >= 0 for every edge
    and returns the minimal lam + mu.
    """
    vx, vy = v
    if vx == 0 and vy == 0:
        return 0.0
    best = math.inf
    pts = list(vertices)
    n = len(pts)
    for i in range(n):
        (ax, ay), (bx, by) = pts[i], pts[(i + 1) % n]
        det = ax * by - ay * bx
        if abs(det) < 1e-14:
            continue
        lam = (vx * by - vy * bx) / det
        mu = (ax * vy - ay * vx) / det
        if lam >= -1e-12 and mu >= -1e-12:
            best = min(best, lam + mu)
    return best


def polar_membership_oracle(vertices, y) -> bool:
    """y lies in the polar body iff <x, y> <= 1 for all polygon vertices."""
    return all(x[0] * y[0] + x[1] * y[1] <= 1.0 + 1e-12 for x in vertices)


def polar_area_grid_oracle(vertices, half_width: float, n: int = 400) -> float:
    """Monte-Carlo-free grid estimate of the polar body area."""
    xs = np.linspace(-half_width, half_width, n)
    cell = (2.0 * half_width / (n - 1)) ** 2
    gx, gy = np.meshgrid(xs, xs)
    inside = np.ones(gx.shape, dtype=bool)
    for vx, vy in vertices:
        inside &= vx * gx + vy * gy <= 1.0
    return float(inside.sum()) * cell


def random_symmetric_polygon(rng: random.Random, max_vertices: int = 12,
                             radius_lo: float = 0.35, radius_hi: float = 1.8) -> Norm2D:
    """Random centrally symmetric strictly convex polygon norm."""
    while True:
        k = rng.randrange(2, max_vertices // 2 + 1)
        angles = sorted(rng.uniform(0.0, math.pi) for _ in range(k))
        pts = []
        for t in angles:
            r = rng.uniform(radius_lo, radius_hi)
            pts.append(complex(r * math.cos(t), r * math.sin(t)))
        pts = pts + [-p for p in pts]
        hull = _hull(pts)
        if len(hull) >= 4 and len(hull) % 2 == 0:
            try:
                return Norm2D.polygon([(p.real, p.imag) for p in hull])
            except Exception:
                continue


def random_parallelogram(rng: random.Random) -> Norm2D:
    """Random symmetric parallelogram norm (Mahler product exactly 8)."""
    while True:
        u = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
        v = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
        det = u.real * v.imag - u.imag * v.real
        if abs(det) < 0.2 or abs(u) < 0.2 or abs(v) < 0.2:
            continue
        if det < 0:
            u, v = v, u
        return Norm2D.polygon([(u.real, u.imag), (v.real, v.imag),
                               (-u.real, -u.imag), (-v.real, -v.imag)])


def random_quadratic(rng: random.Random) -> Norm2D:
    a = np.array([[rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)],
                  [rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)]])
    g = a.T @ a + 0.15 * np.eye(2)
    return Norm2D.quadratic(g)


def random_norm(rng: random.Random) -> Norm2D:
    r = rng.random()
    if r < 0.4:
        return random_quadratic(rng)
    if r < 0.7:
        return random_symmetric_polygon(rng)
    return random_parallelogram(rng)


def random_lattice_basis(rng: random.Random):
    """Random 2-D basis with moderate conditioning."""
    while True:
        a = (rng.uniform(-2, 2), rng.uniform(-2, 2))
        b = (rng.uniform(-2, 2), rng.uniform(-2, 2))
        det = a[0] * b[1] - a[1] * b[0]
        la = math.hypot(*a)
        lb = math.hypot(*b)
        if la < 0.3 or lb < 0.3:
            continue
        if abs(det) > 0.25 * la * lb:
            return a, b


def _hull(points):
    pts = sorted(set((p.real, p.imag) for p in points))

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2:
                a, b = out[-2], out[-1]
                if (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) > 1e-9:
                    break
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(reversed(pts))
    return [complex(x, y) for x, y in lower[:-1] + upper[:-1]]
