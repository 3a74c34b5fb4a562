"""Integer cubical grids: elementary cells, cubical sets and their topology.

A cell is stored as ``(base, extent)`` where ``base`` is an integer vector and
bit ``i`` of ``extent`` says whether the cell spans ``[base_i, base_i + 1]``
on axis ``i`` (otherwise it is the single point ``base_i``).  All coordinates
are in units of the grid pitch ``delta / 2**level``; the real scale only
enters when binning data.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Sequence

# Fractional bits used when snapping real coordinates to the grid.
FRAC_BITS = 40
ONE = 1 << FRAC_BITS


@dataclass(frozen=True)
class GridGeometry:
    dim: int
    delta: float
    level: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("grid dimension must be >= 1")
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ValueError("delta must be a positive finite number")
        if self.level < 0:
            raise ValueError("refinement level must be >= 0")

    @property
    def pitch(self) -> float:
        return self.delta / (1 << self.level)

    def refined(self, k: int) -> "GridGeometry":
        return GridGeometry(self.dim, self.delta, self.level + k)


class Cell(NamedTuple):
    base: tuple
    extent: int

    @property
    def dim(self) -> int:
        return bin(self.extent).count("1")

    def is_top(self, d: int) -> bool:
        return self.extent == (1 << d) - 1

    def faces(self) -> set:
        return faces(self)

    def vertices(self) -> list:
        return cell_vertices(self)

    def __str__(self):
        parts = []
        for i, b in enumerate(self.base):
            parts.append(f"[{b},{b + 1}]" if self.extent >> i & 1 else f"{{{b}}}")
        return "x".join(parts)


def top(base: Sequence[int]) -> Cell:
    base = tuple(int(b) for b in base)
    return Cell(base, (1 << len(base)) - 1)


def vertex(base: Sequence[int]) -> Cell:
    return Cell(tuple(int(b) for b in base), 0)


def _axis_options(c: Cell, i: int):
    b = c.base[i]
    if c.extent >> i & 1:
        return ((b, 1), (b, 0), (b + 1, 0))
    return ((b, 0),)


def faces(c: Cell) -> set:
    """All faces of ``c``, ``c`` included (``3**dim(c)`` cells)."""
    d = len(c.base)
    out = set()
    for combo in itertools.product(*(_axis_options(c, i) for i in range(d))):
        ext = 0
        for i, (_, bit) in enumerate(combo):
            ext |= bit << i
        out.add(Cell(tuple(b for b, _ in combo), ext))
    return out


def facets(c: Cell) -> list:
    """Codimension-one faces of ``c`` with their boundary signs."""
    out = []
    k = 0
    for i in range(len(c.base)):
        if c.extent >> i & 1:
            ext = c.extent & ~(1 << i)
            sign = -1 if k % 2 == 0 else 1
            out.append((Cell(c.base, ext), sign))
            hi = list(c.base)
            hi[i] += 1
            out.append((Cell(tuple(hi), ext), -sign))
            k += 1
    return out


def cell_vertices(c: Cell) -> list:
    axes = [(b, b + 1) if c.extent >> i & 1 else (b,) for i, b in enumerate(c.base)]
    return [Cell(v, 0) for v in itertools.product(*axes)]


def star_tops(c: Cell) -> list:
    """Top cubes having ``c`` as a face."""
    d = len(c.base)
    axes = [(b,) if c.extent >> i & 1 else (b - 1, b) for i, b in enumerate(c.base)]
    full = (1 << d) - 1
    return [Cell(t, full) for t in itertools.product(*axes)]


def cells_of_box(lo: Sequence[int], hi: Sequence[int]) -> Iterator[Cell]:
    """Top cubes filling the integer box ``[lo, hi]``."""
    full = (1 << len(lo)) - 1
    for t in itertools.product(*(range(a, b) for a, b in zip(lo, hi))):
        yield Cell(t, full)


class CubicalSet:
    """Immutable finite set of cells on one grid level."""

    __slots__ = ("cells", "dim", "level", "_closed")

    def __init__(self, cells: Iterable[Cell] = (), dim: int = 1, level: int = 0):
        self.cells = frozenset(cells)
        self.dim = dim
        self.level = level
        self._closed = None

    # construction -------------------------------------------------------
    @classmethod
    def from_tops(cls, tops: Iterable, dim: int, level: int = 0) -> "CubicalSet":
        full = (1 << dim) - 1
        cells = set()
        for t in tops:
            base = t.base if isinstance(t, Cell) else tuple(t)
            cells |= faces(Cell(base, full))
        s = cls(cells, dim, level)
        s._closed = True
        return s

    def _new(self, cells) -> "CubicalSet":
        return CubicalSet(cells, self.dim, self.level)

    def _check(self, other: "CubicalSet"):
        if other.dim != self.dim or other.level != self.level:
            raise ValueError("cubical sets live on different grids")

    # container protocol -------------------------------------------------
    def __contains__(self, c) -> bool:
        return c in self.cells

    def __iter__(self):
        return iter(sorted(self.cells))

    def __len__(self):
        return len(self.cells)

    def __bool__(self):
        return bool(self.cells)

    def __eq__(self, other):
        if not isinstance(other, CubicalSet):
            return NotImplemented
        return (self.cells, self.dim, self.level) == (other.cells, other.dim, other.level)

    def __hash__(self):
        return hash((self.cells, self.dim, self.level))

    def __repr__(self):
        return f"CubicalSet({len(self.cells)} cells, dim={self.dim}, level={self.level})"

    def __or__(self, other):
        self._check(other)
        return self._new(self.cells | other.cells)

    def __and__(self, other):
        self._check(other)
        return self._new(self.cells & other.cells)

    def __sub__(self, other):
        self._check(other)
        return self._new(self.cells - other.cells)

    def __le__(self, other):
        self._check(other)
        return self.cells <= other.cells

    # queries --------------------------------------------------------------
    @property
    def is_closed(self) -> bool:
        if self._closed is None:
            self._closed = all(f in self.cells for c in self.cells for f, _ in facets(c))
        return self._closed

    def tops(self) -> set:
        full = (1 << self.dim) - 1
        return {c for c in self.cells if c.extent == full}

    def vertices(self) -> set:
        return {c for c in self.cells if c.extent == 0}

    def by_dim(self) -> dict:
        out = {}
        for c in sorted(self.cells):
            out.setdefault(c.dim, []).append(c)
        return out


def closure(S: CubicalSet) -> CubicalSet:
    if S._closed:
        return S
    cells = set()
    for c in S.cells:
        if c not in cells:
            cells |= faces(c)
    out = S._new(cells)
    out._closed = True
    return out


def is_interior_cell(S: CubicalSet, c: Cell, ambient=None) -> bool:
    return all(t in S.cells for t in star_tops(c) if ambient is None or t in ambient)


def interior(S: CubicalSet, ambient=None) -> frozenset:
    """Open cells whose union is the topological interior of ``|S|``.

    With ``ambient`` (a collection of top cubes) the interior is taken
    relative to the union of those cubes: star cubes outside it are ignored.
    """
    tops = S.tops()
    if ambient is None:
        return frozenset(c for c in closure(S).cells if all(t in tops for t in star_tops(c)))
    return frozenset(c for c in closure(S).cells
                     if all(t in tops for t in star_tops(c) if t in ambient))


def boundary(S: CubicalSet, ambient=None) -> CubicalSet:
    cl = closure(S)
    out = cl._new(cl.cells - interior(S, ambient))
    out._closed = True
    return out


def components(S: CubicalSet) -> list:
    """Connected components of a closed set, ordered by their minimal cell."""
    parent = {c: c for c in S.cells}

    def find(c):
        while parent[c] != c:
            parent[c] = parent[parent[c]]
            c = parent[c]
        return c

    for c in S.cells:
        rc = find(c)
        for v in cell_vertices(c):
            if v in parent:
                rv = find(v)
                if rv != rc:
                    parent[rv] = rc
    groups = {}
    for c in S.cells:
        groups.setdefault(find(c), set()).add(c)
    parts = [S._new(g) for g in groups.values()]
    for p in parts:
        p._closed = S._closed
    parts.sort(key=lambda p: min(p.cells))
    return parts


def neighborhood(S: CubicalSet, within: CubicalSet | None = None) -> CubicalSet:
    """Closure of all top cubes touching ``S`` (optionally restricted to ``within``)."""
    tops = set()
    for v in closure(S).vertices():
        tops.update(star_tops(v))
    if within is not None:
        tops &= within.cells
    return CubicalSet.from_tops(tops, S.dim, S.level)


def refine(S: CubicalSet, k: int) -> CubicalSet:
    """The same point set expressed on the grid refined ``2**k`` times."""
    if k == 0:
        return S
    m = 1 << k
    out = set()
    for c in S.cells:
        axes = []
        for i, b in enumerate(c.base):
            if c.extent >> i & 1:
                opts = [(b * m + j, 1) for j in range(m)]
                opts += [(b * m + j, 0) for j in range(1, m)]
            else:
                opts = [(b * m, 0)]
            axes.append(opts)
        for combo in itertools.product(*axes):
            ext = 0
            for i, (_, bit) in enumerate(combo):
                ext |= bit << i
            out.add(Cell(tuple(x for x, _ in combo), ext))
    res = CubicalSet(out, S.dim, S.level + k)
    res._closed = S._closed
    return res


def coarse_carrier(c: Cell, k: int) -> Cell:
    """The cell of the grid ``2**k`` times coarser whose open part contains ``c``."""
    m = 1 << k
    base, ext = [], 0
    for i, b in enumerate(c.base):
        lo = b
        hi = b + (c.extent >> i & 1)
        q = lo // m
        if lo % m == 0 and hi == lo:
            base.append(q)
        else:
            base.append(q)
            ext |= 1 << i
    return Cell(tuple(base), ext)


def coarsen(S: CubicalSet, k: int) -> CubicalSet:
    """Smallest set on the grid ``2**k`` times coarser containing ``|S|``."""
    if k == 0:
        return S
    return closure(CubicalSet({coarse_carrier(c, k) for c in S.cells}, S.dim, S.level - k))


def eps_hull(S: CubicalSet, k: int) -> CubicalSet:
    """Closed max-norm neighbourhood of radius ``2**-k`` (grid units) of ``|S|``.

    The result is exact on the grid refined ``2**k`` times.
    """
    if k < 1:
        raise ValueError("eps_hull needs k >= 1 (radius below one grid pitch)")
    m = 1 << k
    tops = set()
    for c in S.cells:
        lo = [b * m - 1 for b in c.base]
        hi = [(b + (c.extent >> i & 1)) * m + 1 for i, b in enumerate(c.base)]
        tops.update(cells_of_box(lo, hi))
    return CubicalSet.from_tops(tops, S.dim, S.level + k)


# real data -> grid ------------------------------------------------------------

def snap(x: Sequence[float], g: GridGeometry) -> tuple:
    """Grid coordinates of ``x`` as integers with ``FRAC_BITS`` fractional bits."""
    out = []
    for xi in x:
        xi = float(xi)
        if not math.isfinite(xi):
            raise ValueError("cannot bin a non-finite coordinate")
        out.append(round(xi / g.pitch * ONE))
    return tuple(out)


def carrier_of_snapped(q: Sequence[int]) -> Cell:
    base, ext = [], 0
    for i, qi in enumerate(q):
        base.append(qi >> FRAC_BITS)
        if qi & (ONE - 1):
            ext |= 1 << i
    return Cell(tuple(base), ext)


def bin_point(x: Sequence[float], g: GridGeometry) -> Cell:
    """Carrier cell of ``x``: the unique cell whose open part contains it."""
    if len(x) != g.dim:
        raise ValueError("point dimension does not match the grid")
    return carrier_of_snapped(snap(x, g))


# cube dump format -------------------------------------------------------------

def format_cell(c: Cell, d: int) -> str:
    bits = "".join(str(c.extent >> i & 1) for i in range(d))
    return " ".join([str(c.dim), *map(str, c.base), bits])


def parse_cell(line: str) -> Cell:
    parts = line.split()
    bits = parts[-1]
    base = tuple(int(p) for p in parts[1:-1])
    if len(bits) != len(base):
        raise ValueError(f"malformed cube line: {line!r}")
    ext = sum(1 << i for i, ch in enumerate(bits) if ch == "1")
    c = Cell(base, ext)
    if c.dim != int(parts[0]):
        raise ValueError(f"dimension field disagrees with extent: {line!r}")
    return c


def dump_cubes(S: CubicalSet) -> str:
    return "".join(format_cell(c, S.dim) + "\n" for c in sorted(S.cells))


def load_cubes(text: str, dim: int, level: int = 0) -> CubicalSet:
    cells = [parse_cell(ln) for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    return CubicalSet(cells, dim, level)
