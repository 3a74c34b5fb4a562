"""Cubical multivalued maps.

A map is stored through its values on open cells of its domain; every value
is a closed cubical set kept as the frozenset of its top cubes.  Values are
upper semicontinuous: the value on a face contains the value on each coface.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import grid
from .grid import Cell, CubicalSet, GridGeometry, ONE, closure, star_tops
from .hull import DimensionUnsupported, EmptyInput, bbox_rasterize, hull_vertices, rasterize

__all__ = [
    "SampleSet", "CubicalMvMap", "SunflowerMap", "TableMap", "HorizontalEnclosure",
    "VerticalEnclosure", "DomainRestriction", "restrict_to_domain", "AcyclicityReport", "touching_tops",
    "EmptyInput", "DimensionUnsupported", "NotUpperSemicontinuous",
    "rasterize_hull", "build_sunflower", "image", "preimage", "horizontal_enclosure",
    "vertical_enclosure", "double_enclosure", "check_values_acyclic", "dump_map",
]


class NotUpperSemicontinuous(ValueError):
    pass


@dataclass
class SampleSet:
    """Finite sample ``x[i] -> y[i]`` of a map on ``R^d``."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.y = np.atleast_2d(np.asarray(self.y, dtype=float))
        if self.x.shape != self.y.shape:
            raise ValueError("x and y must have the same shape")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise ValueError("samples must be finite")

    @classmethod
    def scalar(cls, x, y):
        x = np.asarray(x, dtype=float).reshape(-1, 1)
        y = np.asarray(y, dtype=float).reshape(-1, 1)
        return cls(x, y)

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def __len__(self):
        return self.x.shape[0]


def _snap_rows(a: np.ndarray, g: GridGeometry) -> list:
    # same rounding as grid.snap (round half to even), done in bulk
    q = np.rint(a / g.pitch * ONE)
    return [tuple(int(v) for v in row) for row in q]


def _as_tops(bases, d):
    full = (1 << d) - 1
    return frozenset(Cell(tuple(b), full) for b in bases)


def _refine_tops(tops, k, d):
    if k == 0:
        return frozenset(tops)
    m = 1 << k
    full = (1 << d) - 1
    out = set()
    for t in tops:
        for off in itertools.product(range(m), repeat=d):
            out.add(Cell(tuple(b * m + o for b, o in zip(t.base, off)), full))
    return frozenset(out)


def _dilate_tops(tops, d):
    """Tops of the closed one-pitch neighbourhood of a union of top cubes."""
    full = (1 << d) - 1
    out = set()
    for t in tops:
        for off in itertools.product((-1, 0, 1), repeat=d):
            out.add(Cell(tuple(b + o for b, o in zip(t.base, off)), full))
    return frozenset(out)


def touching_tops(S: CubicalSet) -> set:
    """Top cubes whose closure meets ``|S|``."""
    out = set()
    for v in closure(S).vertices():
        out.update(star_tops(v))
    return out


class CubicalMvMap:
    """Base class: subclasses implement ``_compute(cell) -> frozenset of tops``."""

    def __init__(self, geometry: GridGeometry, domain: CubicalSet):
        self.geometry = geometry
        self.domain = closure(domain)
        self.domain_tops = frozenset(self.domain.tops())
        self._cache = {}

    @property
    def dim(self) -> int:
        return self.geometry.dim

    @property
    def level(self) -> int:
        return self.geometry.level

    def _compute(self, c: Cell) -> frozenset:
        raise NotImplementedError

    def value_tops(self, c: Cell) -> frozenset:
        """Top cubes of the value on the open cell ``c`` (empty off the domain)."""
        v = self._cache.get(c)
        if v is None:
            v = self._compute(c) if c in self.domain.cells else frozenset()
            self._cache[c] = v
        return v

    def value(self, c: Cell) -> CubicalSet:
        return CubicalSet.from_tops(self.value_tops(c), self.dim, self.level)

    def carrier_tops(self, c: Cell) -> frozenset:
        """Value over the closed cell ``c``: union over its vertices."""
        out = set()
        for v in grid.cell_vertices(c):
            out |= self.value_tops(v)
        return frozenset(out)

    def empty(self) -> CubicalSet:
        return CubicalSet((), self.dim, self.level)

    def check_usc(self, cells=None) -> list:
        """Pairs (face, coface) violating upper semicontinuity."""
        bad = []
        for c in sorted(cells if cells is not None else self.domain.cells):
            vc = self.value_tops(c)
            for f, _ in grid.facets(c):
                if not vc <= self.value_tops(f):
                    bad.append((f, c))
        return bad


class SunflowerMap(CubicalMvMap):
    """Sunflower enclosure of sampled data.

    The value on an open cell is the rasterized convex hull of the images of
    all samples lying in some top cube that contains the cell.
    """

    def __init__(self, samples: SampleSet, geometry: GridGeometry, exact: bool = True):
        if len(samples) == 0:
            raise EmptyInput("sunflower enclosure needs at least one sample")
        d = geometry.dim
        if samples.dim != d:
            raise ValueError("sample dimension does not match the grid")
        if exact and d > 3:
            raise DimensionUnsupported(f"exact hull rasterization supports d <= 3, got {d}")
        self.exact = exact
        xs = _snap_rows(samples.x, geometry)
        ys = _snap_rows(samples.y, geometry)
        per_top = {}
        for qx, qy in zip(xs, ys):
            for t in star_tops(grid.carrier_of_snapped(qx)):
                per_top.setdefault(t, set()).add(qy)
        # only hull vertices matter for every later hull
        self.points = {t: tuple(hull_vertices(sorted(p))) for t, p in per_top.items()}
        dom = CubicalSet.from_tops(self.points, d, geometry.level)
        super().__init__(geometry, dom)

    def _compute(self, c):
        pts = []
        for t in star_tops(c):
            pts.extend(self.points.get(t, ()))
        bases = rasterize(pts, self.dim) if self.exact else bbox_rasterize(pts)
        return _as_tops(bases, self.dim)


class TableMap(CubicalMvMap):
    """Map given by an explicit table of values.

    ``values`` maps cells (or top-cube bases) to iterables of top cubes (or
    bases).  Cells missing from the table get the union of the values on the
    top cubes in their star, the smallest upper semicontinuous extension.
    """

    def __init__(self, geometry: GridGeometry, values: dict, check: bool = True):
        d = geometry.dim
        full = (1 << d) - 1
        table = {}
        for c, v in values.items():
            if not isinstance(c, Cell):
                c = Cell(tuple(c), full)
            table[c] = frozenset(t if isinstance(t, Cell) else Cell(tuple(t), full) for t in v)
        self.table = table
        super().__init__(geometry, CubicalSet(table, d, geometry.level))
        if check:
            bad = self.check_usc()
            if bad:
                f, c = bad[0]
                raise NotUpperSemicontinuous(f"value on {f} does not contain value on {c}")

    def _compute(self, c):
        v = self.table.get(c)
        if v is not None:
            return v
        out = set()
        for t in star_tops(c):
            out |= self.table.get(t, frozenset())
        return frozenset(out)


class HorizontalEnclosure(CubicalMvMap):
    """``F_eps(x) = F(closed eps-ball of x)`` on the grid refined ``2**k`` times."""

    def __init__(self, base: CubicalMvMap, k: int):
        if k < 1:
            raise ValueError("horizontal enclosure needs k >= 1")
        self.base = base
        self.k = k
        g = base.geometry.refined(k)
        super().__init__(g, grid.refine(base.domain, k))

    def _axis_minimal(self, j, extent_bit):
        # coarse components (base, bit) met minimally by the ball, on one axis
        m = 1 << self.k
        if extent_bit:
            lo, hi, strict = j - 1, j + 2, True
        else:
            lo, hi, strict = j - 1, j + 1, False
        if strict:
            pts = [p for p in range(lo + 1, hi) if p % m == 0]
        else:
            pts = [p for p in range(lo, hi + 1) if p % m == 0]
        if pts:
            return [(p // m, 0) for p in pts]
        return [(j // m, 1)]

    def _coarse_tops(self, c):
        d = self.dim
        axes = [self._axis_minimal(b, c.extent >> i & 1) for i, b in enumerate(c.base)]
        out = set()
        for combo in itertools.product(*axes):
            cell = Cell(tuple(b for b, _ in combo), sum(bit << i for i, (_, bit) in enumerate(combo)))
            out |= self.base.value_tops(cell)
        return frozenset(out)

    def _compute(self, c):
        return _refine_tops(self._coarse_tops(c), self.k, self.dim)


class VerticalEnclosure(CubicalMvMap):
    """``F^eps(x)``: values thickened by one pitch of the grid refined ``2**k`` times.

    ``k = 0`` thickens by one pitch of the map's own grid; it is used on maps
    that already live on a refined grid.
    """

    def __init__(self, base: CubicalMvMap, k: int):
        if k < 0:
            raise ValueError("refinement must be >= 0")
        self.base = base
        self.k = k
        super().__init__(base.geometry.refined(k), grid.refine(base.domain, k))

    def _compute(self, c):
        src = grid.coarse_carrier(c, self.k) if self.k else c
        return _dilate_tops(_refine_tops(self.base.value_tops(src), self.k, self.dim), self.dim)


class DomainRestriction(CubicalMvMap):
    """``F(x) cap X`` for the domain ``X`` of ``F``: a self-map of ``X``.

    Intersecting with a closed cubical set keeps the map cubical and upper
    semicontinuous; acyclicity of the smaller values must be checked again.
    """

    def __init__(self, base: CubicalMvMap):
        self.base = base
        super().__init__(base.geometry, base.domain)

    def _compute(self, c):
        return self.base.value_tops(c) & self.domain_tops


def restrict_to_domain(F: CubicalMvMap) -> DomainRestriction:
    return F if isinstance(F, DomainRestriction) else DomainRestriction(F)


# operations --------------------------------------------------------------------

def rasterize_hull(points, g: GridGeometry, exact: bool = True) -> CubicalSet:
    """Closed top cubes meeting the convex hull of real ``points``, with faces."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise EmptyInput("cannot rasterize the hull of an empty point set")
    if pts.shape[1] != g.dim:
        raise ValueError("point dimension does not match the grid")
    q = _snap_rows(pts, g)
    if exact:
        bases = rasterize(q, g.dim)
    else:
        bases = bbox_rasterize(q)
    return CubicalSet.from_tops(bases, g.dim, g.level)


def build_sunflower(samples: SampleSet, g: GridGeometry, exact: bool = True) -> SunflowerMap:
    return SunflowerMap(samples, g, exact=exact)


def image(F: CubicalMvMap, S: CubicalSet) -> CubicalSet:
    """Union of the values on the cells of ``S`` lying in the domain."""
    tops = set()
    for v in closure(S).vertices():
        if v in F.domain.cells:
            tops |= F.value_tops(v)
    return CubicalSet.from_tops(tops, F.dim, F.level)


def preimage(F: CubicalMvMap, S: CubicalSet) -> CubicalSet:
    """Closure of the open domain cells whose value meets ``S``."""
    touch = touching_tops(S)
    if not touch:
        return F.empty()
    hit = [c for c in F.domain.cells if not touch.isdisjoint(F.value_tops(c))]
    return closure(CubicalSet(hit, F.dim, F.level))


def horizontal_enclosure(F: CubicalMvMap, k: int) -> HorizontalEnclosure:
    return HorizontalEnclosure(F, k)


def vertical_enclosure(F: CubicalMvMap, k: int) -> VerticalEnclosure:
    if k < 1:
        raise ValueError("vertical enclosure needs k >= 1 (eps below one grid pitch)")
    return VerticalEnclosure(F, k)


def double_enclosure(F: CubicalMvMap, k: int) -> VerticalEnclosure:
    """``(F_eps)^eps`` with ``eps = pitch / 2**k``, on the refined grid."""
    return VerticalEnclosure(HorizontalEnclosure(F, k), 0)


@dataclass
class AcyclicityReport:
    ok: bool
    checked: int
    failures: list

    def __bool__(self):
        return self.ok


def check_values_acyclic(F: CubicalMvMap, over: CubicalSet | None = None) -> AcyclicityReport:
    """Check that the carrier value over every closed cell of ``over`` is acyclic.

    Elementary collapses are tried first; if they get stuck the reduced
    rational homology of the value decides.
    """
    from .homology import betti_numbers, collapses_to_point

    cells = F.domain.cells if over is None else closure(over).cells & F.domain.cells
    seen = {}
    failures = []
    for c in sorted(cells):
        tops = F.carrier_tops(c)
        if tops not in seen:
            bad = ()
            if not collapses_to_point(tops, F.dim):
                b = betti_numbers(CubicalSet.from_tops(tops, F.dim, F.level))
                if b != [1] + [0] * (len(b) - 1):
                    bad = tuple(b)
            seen[tops] = bad
        if seen[tops]:
            failures.append((c, seen[tops]))
    return AcyclicityReport(not failures, len(cells), failures)


def dump_map(F: CubicalMvMap) -> str:
    """One line per top cube of the domain: ``base : image bases``."""
    lines = []
    for t in sorted(F.domain.tops()):
        img = sorted(F.value_tops(t))
        lhs = " ".join(map(str, t.base))
        rhs = "; ".join(" ".join(map(str, s.base)) for s in img)
        lines.append(f"{lhs} : {rhs}\n")
    return "".join(lines)
