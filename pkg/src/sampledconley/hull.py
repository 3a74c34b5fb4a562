"""Exact rasterization of convex hulls against the integer grid.

Points are integer vectors in fixed point (``grid.FRAC_BITS`` fractional
bits), so every predicate below is evaluated exactly with Python integers or
``fractions.Fraction``.  ``rasterize`` returns the bases of all closed unit
cubes whose body meets the convex hull of the points.
"""
from __future__ import annotations

import math
from fractions import Fraction
from itertools import combinations

import numpy as np

from .grid import ONE


class EmptyInput(ValueError):
    pass


class DimensionUnsupported(ValueError):
    pass


def _cube_range(lo, hi):
    """Integer bases ``b`` with ``[b, b+1]`` meeting ``[lo, hi]`` (fixed point)."""
    return range(math.ceil(Fraction(lo, ONE)) - 1, math.floor(Fraction(hi, ONE)) + 1)


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def hull2(points):
    """Vertices of the 2D convex hull in counter-clockwise order (monotone chain)."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts
    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _raster_polygon(points):
    """Cube bases (2D) meeting the hull of ``points`` (ints or Fractions)."""
    poly = hull2(points)
    ys = [p[1] for p in poly]
    n = len(poly)
    edges = [(poly[i], poly[(i + 1) % n]) for i in range(n)] if n > 1 else []
    out = []
    for by in _cube_range(min(ys), max(ys)):
        y0, y1 = by * ONE, (by + 1) * ONE
        xs = [p[0] for p in poly if y0 <= p[1] <= y1]
        for p, q in edges:
            for c in (y0, y1):
                if (p[1] < c < q[1]) or (q[1] < c < p[1]):
                    xs.append(p[0] + Fraction((c - p[1]) * (q[0] - p[0]), q[1] - p[1]))
        if not xs:
            continue
        for bx in _cube_range(min(xs), max(xs)):
            out.append((bx, by))
    return out


def _independent(points):
    """Indices of an affinely independent prefix found greedily (exact)."""
    p0 = points[0]
    i1 = next((i for i, p in enumerate(points) if p != p0), None)
    if i1 is None:
        return [0]
    u = tuple(a - b for a, b in zip(points[i1], p0))
    for i2, p in enumerate(points):
        v = tuple(a - b for a, b in zip(p, p0))
        n = (u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0])
        if any(n):
            for i3, r in enumerate(points):
                w = tuple(a - b for a, b in zip(r, p0))
                if n[0] * w[0] + n[1] * w[1] + n[2] * w[2] != 0:
                    return [0, i1, i2, i3]
            return [0, i1, i2]
    return [0, i1]


def hull_vertices(points):
    """A subset of ``points`` with the same convex hull.

    Exact in dimensions 1 and 2.  In 3D, full-dimensional sets are pruned with
    qhull, keeping every point within a safety margin of the float hull so
    that no true vertex can be lost; flat and collinear sets are reduced
    exactly.
    """
    pts = list(dict.fromkeys(tuple(p) for p in points))
    if len(pts) <= 4:
        return pts
    d = len(pts[0])
    if d == 1:
        return [min(pts), max(pts)]
    if d == 2:
        return hull2(pts)
    if d != 3:
        return pts
    idx = _independent(pts)
    if len(idx) == 2:
        return [min(pts), max(pts)]
    if len(idx) == 3:
        p0 = pts[0]
        u = [a - b for a, b in zip(pts[idx[1]], p0)]
        v = [a - b for a, b in zip(pts[idx[2]], p0)]
        nrm = (u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0])
        drop = max(range(3), key=lambda i: abs(nrm[i]))
        keep = [i for i in range(3) if i != drop]
        proj = {}
        for p in pts:
            proj[(p[keep[0]], p[keep[1]])] = p
        return [proj[q] for q in hull2(list(proj))]
    from scipy.spatial import ConvexHull, QhullError

    arr = np.array(pts, dtype=float) / ONE
    try:
        h = ConvexHull(arr)
    except QhullError:
        return pts
    dist = arr @ h.equations[:, :3].T + h.equations[:, 3]
    keep = dist.max(axis=1) > -1e-7
    keep[h.vertices] = True
    return [p for p, k in zip(pts, keep) if k]


def rasterize(points, d=None):
    """Bases of the closed unit cubes meeting ``conv(points)``."""
    pts = [tuple(p) for p in points]
    if not pts:
        raise EmptyInput("cannot rasterize the hull of an empty point set")
    d = d or len(pts[0])
    if d > 3:
        raise DimensionUnsupported(f"exact hull rasterization supports d <= 3, got {d}")
    verts = hull_vertices(pts)
    if d == 1:
        lo, hi = min(p[0] for p in verts), max(p[0] for p in verts)
        return {(b,) for b in _cube_range(lo, hi)}
    if d == 2:
        return set(_raster_polygon(verts))
    return _raster_3d(verts)


# pruning margin in grid units; float errors here are below 1e-12
_MARGIN = 1e-7


def _near_hull_2d(xy: np.ndarray) -> np.ndarray:
    """Mask of points that may be vertices of the 2D hull (float filter with margin)."""
    from scipy.spatial import ConvexHull, QhullError

    if len(xy) <= 8:
        return np.ones(len(xy), dtype=bool)
    try:
        h = ConvexHull(xy)
    except QhullError:
        return np.ones(len(xy), dtype=bool)
    dist = xy @ h.equations[:, :2].T + h.equations[:, 2]
    keep = dist.max(axis=1) > -_MARGIN
    keep[h.vertices] = True
    return keep


def _raster_3d(verts):
    """Slab by slab: the section of the hull with ``z0 <= z <= z1`` projects to
    the hull of the vertices inside the slab and the crossings of vertex pairs
    with the two planes."""
    V = np.array(verts, dtype=float) / ONE
    zs = [p[2] for p in verts]
    out = set()
    for bz in _cube_range(min(zs), max(zs)):
        z0, z1 = bz * ONE, (bz + 1) * ONE
        exact = [(p[0], p[1]) for p in verts if z0 <= p[2] <= z1]
        approx = [V[[i for i, p in enumerate(verts) if z0 <= p[2] <= z1], :2]]
        pairs = []
        for c in (z0, z1):
            lo = [i for i, p in enumerate(verts) if p[2] < c]
            hi = [i for i, p in enumerate(verts) if p[2] > c]
            if not lo or not hi:
                continue
            a = np.repeat(lo, len(hi))
            b = np.tile(hi, len(lo))
            t = (c / ONE - V[a, 2]) / (V[b, 2] - V[a, 2])
            approx.append(V[a, :2] + t[:, None] * (V[b, :2] - V[a, :2]))
            pairs.extend((int(i), int(j), c) for i, j in zip(a, b))
        xy = np.concatenate(approx)
        keep = _near_hull_2d(xy)
        sec = [q for q, k in zip(exact, keep) if k]
        for (i, j, c), k in zip(pairs, keep[len(exact):]):
            if k:
                p, q = verts[i], verts[j]
                t = Fraction(c - p[2], q[2] - p[2])
                sec.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
        if sec:
            out.update((bx, by, bz) for bx, by in _raster_polygon(sec))
    return out


def bbox_rasterize(points):
    """Bounding-box over-approximation for any dimension (not exact)."""
    pts = np.array([tuple(p) for p in points], dtype=object)
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    ranges = [_cube_range(a, b) for a, b in zip(lo, hi)]
    from itertools import product

    return set(product(*ranges))
