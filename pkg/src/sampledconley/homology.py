"""Relative cubical homology over Q, chain selectors and the index map.

Chains are sparse dicts ``cell -> coefficient``.  Homology of a pair is
computed by left-to-right column reduction ``R = D V`` of every boundary
matrix (cells in canonical order); generators are the columns of ``V`` whose
reduced column vanishes and whose index is not a pivot of the next degree.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

from . import qmat
from .grid import Cell, CubicalSet, closure, faces, facets, format_cell, interior

__all__ = [
    "ColumnReducer", "ChainComplex", "HomologyBasis", "GradedEndomorphism", "ChainSelector",
    "NotACycle", "NoBoundingChain", "InclusionNotIso", "homology", "betti_numbers",
    "homology_snf", "smith_diagonal", "collapses_to_point", "chain_boundary",
    "chain_selector", "exit_cells", "index_map",
]


class NotACycle(ValueError):
    pass


class NoBoundingChain(RuntimeError):
    def __init__(self, cell):
        super().__init__(f"no bounding chain in the carrier of {cell}")
        self.cell = cell


class InclusionNotIso(RuntimeError):
    pass


def _coef(a, b):
    q = Fraction(a, 1) / b
    return q.numerator if q.denominator == 1 else q


def _axpy(dst: dict, a, src: dict):
    """``dst += a * src`` in place, dropping zeros."""
    for k, v in src.items():
        x = dst.get(k, 0) + a * v
        if x:
            dst[k] = x
        else:
            dst.pop(k, None)


class ColumnReducer:
    """Left-to-right reduction ``R = D V`` of sparse integer columns.

    Rows and columns are integer indices.  ``V`` is unitriangular, which is
    what makes the generator bookkeeping below valid.
    """

    def __init__(self, columns):
        self.R = []
        self.V = []
        self.pivot = {}
        for j, col in enumerate(columns):
            r = dict(col)
            v = {j: 1}
            while r:
                i = max(r)
                p = self.pivot.get(i)
                if p is None:
                    self.pivot[i] = j
                    break
                a = _coef(r[i], self.R[p][i])
                _axpy(r, -a, self.R[p])
                _axpy(v, -a, self.V[p])
            self.R.append(r)
            self.V.append(v)

    @property
    def rank(self) -> int:
        return len(self.pivot)

    def zero_columns(self):
        return [j for j, r in enumerate(self.R) if not r]

    def solve(self, c: dict):
        """Some ``x`` with ``D x = c``, or ``None`` if ``c`` is not in the image."""
        c = dict(c)
        x = {}
        while c:
            i = max(c)
            p = self.pivot.get(i)
            if p is None:
                return None
            a = _coef(c[i], self.R[p][i])
            _axpy(c, -a, self.R[p])
            _axpy(x, a, self.V[p])
        return x


def chain_boundary(chain: dict) -> dict:
    out = {}
    for c, a in chain.items():
        for f, s in facets(c):
            x = out.get(f, 0) + s * a
            if x:
                out[f] = x
            else:
                out.pop(f, None)
    return out


class ChainComplex:
    """Relative chain complex ``C(P1, P2)`` with cells in canonical order."""

    def __init__(self, P1: CubicalSet, P2: CubicalSet | None = None):
        P1 = closure(P1)
        P2 = closure(P2) if P2 is not None else CubicalSet((), P1.dim, P1.level)
        if not P2.cells <= P1.cells:
            raise ValueError("P2 must be contained in P1")
        self.dim = P1.dim
        self.P1, self.P2 = P1, P2
        cells = P1.cells - P2.cells
        self.basis = [sorted(c for c in cells if c.dim == k) for k in range(self.dim + 1)]
        self.index = [{c: i for i, c in enumerate(b)} for b in self.basis]

    def boundary_columns(self, k) -> list:
        """Columns of ``d_k : C_k -> C_{k-1}`` as sparse dicts of row indices."""
        if k == 0 or k > self.dim:
            return [{} for _ in (self.basis[k] if k <= self.dim else [])]
        rows = self.index[k - 1]
        out = []
        for c in self.basis[k]:
            col = {}
            for f, s in facets(c):
                i = rows.get(f)
                if i is not None:
                    col[i] = s
            out.append(col)
        return out

    def to_vector(self, k, chain: dict) -> dict:
        idx = self.index[k]
        return {idx[c]: a for c, a in chain.items() if c in idx}

    def to_chain(self, k, vec: dict) -> dict:
        b = self.basis[k]
        return {b[i]: a for i, a in vec.items()}


@dataclass
class HomologyBasis:
    """Betti numbers, representative cycles and coordinates of ``H_*(P1, P2; Q)``."""

    complex: ChainComplex
    reducers: list
    essential: list  # per degree: column indices of generators
    betti: list = field(default_factory=list)

    def __post_init__(self):
        self.betti = [len(e) for e in self.essential]
        self._pos = [{j: n for n, j in enumerate(e)} for e in self.essential]

    def generator(self, k, n) -> dict:
        """The ``n``-th representative cycle in degree ``k`` as a chain."""
        j = self.essential[k][n]
        return self.complex.to_chain(k, self.reducers[k].V[j])

    def coordinates(self, k, chain: dict) -> list:
        """Coordinates of the class of a relative cycle (cells off the pair are ignored)."""
        z = self.complex.to_vector(k, chain)
        coords = [Fraction(0)] * self.betti[k]
        nxt = self.reducers[k + 1] if k + 1 < len(self.reducers) else None
        pos = self._pos[k]
        V = self.reducers[k].V
        while z:
            i = max(z)
            p = nxt.pivot.get(i) if nxt is not None else None
            if p is not None:
                _axpy(z, -_coef(z[i], nxt.R[p][i]), nxt.R[p])
            elif i in pos:
                a = z[i]
                coords[pos[i]] += a
                _axpy(z, -a, V[i])
            else:
                raise NotACycle(f"chain is not a relative cycle in degree {k}")
        return coords

    def supports(self, k) -> list:
        return [sorted(self.generator(k, n)) for n in range(self.betti[k])]


def homology(P1: CubicalSet, P2: CubicalSet | None = None) -> HomologyBasis:
    cx = ChainComplex(P1, P2)
    reducers = [ColumnReducer(cx.boundary_columns(k)) for k in range(cx.dim + 1)]
    essential = []
    for k in range(cx.dim + 1):
        lows = reducers[k + 1].pivot if k + 1 <= cx.dim else {}
        essential.append([j for j in reducers[k].zero_columns() if j not in lows])
    return HomologyBasis(cx, reducers, essential)


def betti_numbers(P1: CubicalSet, P2: CubicalSet | None = None) -> list:
    return homology(P1, P2).betti


# integer mode -----------------------------------------------------------------

def smith_diagonal(M) -> list:
    """Nonzero diagonal entries of the Smith normal form of an integer matrix."""
    A = [list(map(int, r)) for r in M]
    n = len(A)
    m = len(A[0]) if n else 0
    diag = []
    t = 0
    while t < min(n, m):
        nz = [(abs(A[i][j]), i, j) for i in range(t, n) for j in range(t, m) if A[i][j]]
        if not nz:
            break
        _, i, j = min(nz)
        A[t], A[i] = A[i], A[t]
        for r in A:
            r[t], r[j] = r[j], r[t]
        clean = True
        for i in range(t + 1, n):
            if A[i][t]:
                q = A[i][t] // A[t][t]
                A[i] = [x - q * y for x, y in zip(A[i], A[t])]
                clean &= A[i][t] == 0
        for j in range(t + 1, m):
            if A[t][j]:
                q = A[t][j] // A[t][t]
                for r in A:
                    r[j] -= q * r[t]
                clean &= A[t][j] == 0
        if not clean:
            continue
        p = A[t][t]
        bad = next((i for i in range(t + 1, n) for j in range(t + 1, m) if A[i][j] % p), None)
        if bad is not None:
            A[t] = [x + y for x, y in zip(A[t], A[bad])]
            continue
        diag.append(abs(p))
        t += 1
    return diag


def homology_snf(P1: CubicalSet, P2: CubicalSet | None = None):
    """Betti numbers and torsion coefficients via dense Smith normal forms over Z."""
    cx = ChainComplex(P1, P2)
    d = cx.dim
    diags = []
    for k in range(d + 2):
        if k == 0 or k > d:
            diags.append([])
            continue
        cols = cx.boundary_columns(k)
        M = [[0] * len(cols) for _ in cx.basis[k - 1]]
        for j, col in enumerate(cols):
            for i, a in col.items():
                M[i][j] = a
        diags.append(smith_diagonal(M) if cols and M else [])
    betti, torsion = [], []
    for k in range(d + 1):
        betti.append(len(cx.basis[k]) - len(diags[k]) - len(diags[k + 1]))
        torsion.append([x for x in diags[k + 1] if x > 1])
    return betti, torsion


# collapses -----------------------------------------------------------------------

def _cofaces(c: Cell):
    for i, b in enumerate(c.base):
        if not c.extent >> i & 1:
            for s in (b - 1, b):
                base = list(c.base)
                base[i] = s
                yield Cell(tuple(base), c.extent | 1 << i)


def collapses_to_point(tops, d=None) -> bool:
    """Whether the closure of ``tops`` collapses to a vertex by free-face collapses."""
    cells = set()
    for t in tops:
        cells |= faces(t)
    if not cells:
        return False
    count = {c: sum(1 for q in _cofaces(c) if q in cells) for c in cells}
    queue = deque(sorted(c for c, n in count.items() if n == 1))
    while queue:
        c = queue.popleft()
        if c not in cells or count[c] != 1:
            continue
        co = next(q for q in _cofaces(c) if q in cells)
        cells.discard(c)
        cells.discard(co)
        for f, _ in facets(co):
            if f in cells:
                count[f] -= 1
                if count[f] == 1:
                    queue.append(f)
        for f, _ in facets(c):
            if f in cells:
                count[f] -= 1
                if count[f] == 1:
                    queue.append(f)
    return len(cells) == 1


# graded endomorphisms ----------------------------------------------------------

class GradedEndomorphism:
    """Per-degree square rational matrices (homological convention)."""

    def __init__(self, matrices: dict):
        self.matrices = {int(k): qmat.mat(m) for k, m in matrices.items()}
        for k, m in self.matrices.items():
            if any(len(r) != len(m) for r in m):
                raise ValueError(f"degree {k} matrix is not square")

    def __getitem__(self, k):
        return self.matrices.get(k, [])

    def degrees(self):
        return sorted(k for k, m in self.matrices.items() if m)

    def dims(self) -> dict:
        return {k: len(m) for k, m in self.matrices.items()}

    def transpose(self) -> "GradedEndomorphism":
        """The cohomological index map (dual basis)."""
        return GradedEndomorphism({k: qmat.transpose(m) for k, m in self.matrices.items()})

    def compose(self, other) -> "GradedEndomorphism":
        return GradedEndomorphism({k: qmat.matmul(m, other[k]) for k, m in self.matrices.items()})

    def power(self, n) -> "GradedEndomorphism":
        return GradedEndomorphism({k: qmat.mat_pow(m, n) for k, m in self.matrices.items()})

    def __eq__(self, other):
        if not isinstance(other, GradedEndomorphism):
            return NotImplemented
        a = {k: m for k, m in self.matrices.items() if m}
        b = {k: m for k, m in other.matrices.items() if m}
        return a == b

    def to_json(self) -> dict:
        return {str(k): [[qmat.frac_str(x) for x in r] for r in m]
                for k, m in sorted(self.matrices.items())}

    @classmethod
    def from_json(cls, data: dict) -> "GradedEndomorphism":
        return cls({int(k): [[Fraction(x) for x in r] for r in m] for k, m in data.items()})

    def __repr__(self):
        return f"GradedEndomorphism({json.dumps(self.to_json())})"


# chain selectors ------------------------------------------------------------------

def _closure_cells(tops) -> set:
    out = set()
    for t in tops:
        out |= faces(t)
    return out


class ChainSelector:
    """Chain map ``phi`` carried by the closed-cell values of an acyclic map.

    ``phi`` is built lazily cell by cell; ``phi(sigma)`` is supported in
    ``Phi(sigma)``, the union of the values at the vertices of ``sigma``.
    With ``rel`` (a closed set of cells) chains are taken modulo ``rel``:
    cells of ``rel`` are dropped and carriers only need to be acyclic
    relative to their part in ``rel``.
    """

    def __init__(self, F, tie_break=min, rel: frozenset | None = None):
        self.F = F
        self.tie_break = tie_break
        self.rel = frozenset(rel or ())
        self.table = {}
        self._reducers = {}

    def carrier(self, c: Cell) -> frozenset:
        return self.F.carrier_tops(c)

    def __call__(self, c: Cell) -> dict:
        got = self.table.get(c)
        if got is None:
            got = self._build(c)
            self.table[c] = got
        return got

    def apply(self, chain: dict) -> dict:
        out = {}
        for c, a in chain.items():
            _axpy(out, a, self(c))
        return out

    def _build(self, c):
        tops = self.carrier(c)
        if not tops:
            raise NoBoundingChain(c)
        rel = self.rel
        if c.dim == 0:
            if rel and any(q in rel for q in _closure_cells(tops) if q.dim == 0):
                return {}
            v = self.tie_break(t.base for t in tops)
            return {Cell(tuple(v), 0): 1}
        target = {}
        for f, s in facets(c):
            _axpy(target, s, self(f))
        if not target:
            return {}
        if rel:
            x = self._general(c.dim, target, tops)
            if x is None:
                raise NoBoundingChain(c)
            return x
        d = len(c.base)
        if c.dim == 1:
            x = self._path(target, tops)
        elif c.dim == d:
            x = self._integrate(target)
        else:
            x = self._general(c.dim, target, tops)
        if x is None or chain_boundary(x) != target:
            raise NoBoundingChain(c)
        cl = _closure_cells(tops)
        if any(q not in cl for q in x):
            raise NoBoundingChain(c)
        return x

    def _path(self, target, tops):
        # target is  u - w  for two vertices; connect them by a shortest path
        (u, a), (w, b) = sorted(target.items(), key=lambda kv: -kv[1])
        if (a, b) != (1, -1):
            return self._general(1, target, tops)
        cl = _closure_cells(tops)
        prev = {w: None}
        queue = deque([w])
        while queue and u not in prev:
            p = queue.popleft()
            for e in sorted(_cofaces(p)):
                if e not in cl:
                    continue
                for q, _ in facets(e):
                    if q not in prev:
                        prev[q] = (p, e)
                        queue.append(q)
        if u not in prev:
            return None
        x = {}
        q = u
        while prev[q] is not None:
            p, e = prev[q]
            # boundary of e is (upper vertex) - (lower vertex)
            sign = 1 if q > p else -1
            _axpy(x, sign, {e: 1})
            q = p
        return x

    def _integrate(self, target):
        # top degree: integrate along the last axis; the solution is unique
        d = len(next(iter(target)).base)
        full = (1 << d) - 1
        s = 1 if (d - 1) % 2 == 0 else -1
        cols = {}
        for f, a in target.items():
            if f.extent != full & ~(1 << (d - 1)):
                continue
            cols.setdefault(f.base[:-1], []).append((f.base[-1], a))
        x = {}
        for key, lst in cols.items():
            lst.sort(reverse=True)
            run = 0
            for n, (h, a) in enumerate(lst):
                run += s * a
                lo = lst[n + 1][0] if n + 1 < len(lst) else None
                if run and lo is None:
                    return None
                if run:
                    for z in range(lo, h):
                        x[Cell(key + (z,), full)] = run
        return x

    def _general(self, k, target, tops):
        red = self._reducers.get((tops, k))
        if red is None:
            cl = _closure_cells(tops) - self.rel
            rows = sorted(c for c in cl if c.dim == k - 1)
            cols = sorted(c for c in cl if c.dim == k)
            ri = {c: i for i, c in enumerate(rows)}
            columns = [{ri[f]: s for f, s in facets(c) if f in ri} for c in cols]
            red = (ColumnReducer(columns), ri, cols)
            self._reducers[(tops, k)] = red
        reducer, ri, cols = red
        if any(f not in ri for f in target):
            return None
        x = reducer.solve({ri[f]: a for f, a in target.items()})
        if x is None:
            return None
        return {cols[j]: a for j, a in x.items()}


def chain_selector(F, tie_break=min, rel=None) -> ChainSelector:
    return ChainSelector(F, tie_break, rel)


def exit_cells(F, N: CubicalSet, P2: CubicalSet) -> frozenset:
    """``P2`` together with the cells of the domain outside the relative interior of ``N``."""
    intN = interior(N, F.domain_tops)
    return frozenset((closure(F.domain).cells - intN) | closure(P2).cells)


def index_map(F, N: CubicalSet, P1: CubicalSet, P2: CubicalSet, basis: HomologyBasis | None = None,
              selector: ChainSelector | None = None):
    """Homological index map on ``H_*(P1, P2)``.

    The selected image of a cycle lives in ``(P1 u E, P2 u E)`` where ``E``
    is the closure of the cells of ``P1 u F(P1)`` outside ``int N``
    (interiors relative to the domain of ``F``).  The index map is
    ``incl_*^{-1} F_*``.  When no cell of ``P1 \\ P2`` lies in ``E`` the
    inclusion is the identity on relative chains; otherwise its matrix is
    computed and ``InclusionNotIso`` is raised unless it is invertible.

    Values of ``F`` must be acyclic on ``P1`` (see ``check_values_acyclic``);
    otherwise the selector may raise ``NoBoundingChain``.
    """
    G = F
    P1, P2 = closure(P1), closure(P2)
    intN = interior(N, F.domain_tops)
    off = [c for c in P1.cells - P2.cells if c not in intN]
    if off:
        raise InclusionNotIso(f"{len(off)} cells of P1 minus P2 are not interior to N, e.g. {min(off)}")
    if basis is None:
        basis = homology(P1, P2)
    if selector is None:
        selector = chain_selector(G)
    U = P1.cells | closure(_image_of(G, P1)).cells
    E = closure(CubicalSet((c for c in U if c not in intN), P1.dim, P1.level))
    images = {k: [selector.apply(basis.generator(k, n)) for n in range(b)] for k, b in enumerate(basis.betti)}
    if E.cells.isdisjoint(P1.cells - P2.cells):
        coords = basis.coordinates
        J = None
    else:
        tb = homology(CubicalSet(P1.cells | E.cells, P1.dim, P1.level),
                      CubicalSet(P2.cells | E.cells, P1.dim, P1.level))
        if tb.betti != basis.betti:
            raise InclusionNotIso(f"target pair has Betti numbers {tb.betti}, source {basis.betti}")
        coords = tb.coordinates
        J = {}
        for k, b in enumerate(basis.betti):
            Jk = qmat.transpose([tb.coordinates(k, basis.generator(k, n)) for n in range(b)]) if b else []
            if b and qmat.rank(Jk) < b:
                raise InclusionNotIso(f"inclusion is singular in degree {k}")
            J[k] = Jk
    mats = {}
    for k, b in enumerate(basis.betti):
        M = qmat.transpose([[Fraction(a) for a in coords(k, img)] for img in images[k]]) if b else []
        if J is not None and b:
            M = qmat.matmul(qmat.inverse(J[k]), M)
        mats[k] = M
    return GradedEndomorphism(mats), basis, selector


def _image_of(F, S: CubicalSet) -> CubicalSet:
    tops = set()
    for v in S.vertices():
        if v in F.domain.cells:
            tops |= F.value_tops(v)
    return CubicalSet.from_tops(tops, S.dim, S.level)


def dump_cycle(chain: dict, d: int) -> str:
    return "".join(f"{format_cell(c, d)} {qmat.frac_str(a)}\n" for c, a in sorted(chain.items()))
