"""Combinatorial dynamics of cubical maps: invariant parts, blocks, weak index pairs.

Everything is decided on open cells.  A point of the open cell ``t`` is sent
into the closed value ``F(t)``; the points it can reach inside ``N`` lie in
the open cells of ``cl F(t)`` that belong to ``N``.  The cell digraph built
from that rule carries every solution of ``F`` in ``N``, so cells on
bi-infinite paths cover ``Inv(N, F)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

from . import grid
from .grid import CubicalSet, closure, components, faces, interior
from .mvmap import CubicalMvMap, SampleSet, image, touching_tops

__all__ = [
    "BudgetExceeded", "EmptyCandidate", "NoStrategySucceeded",
    "TransitionDigraph", "IsolatingBlock", "IndexPair", "PairReport",
    "transition_digraph", "recurrent_cells", "invariant_cells", "invariant_part_overapprox",
    "is_isolating_block", "find_isolating_block", "close_return_seed", "block_pair", "build_weak_index_pair",
    "verify_weak_index_pair", "restrict_to_components", "saturate",
]


class BudgetExceeded(RuntimeError):
    def __init__(self, msg, candidate=None):
        super().__init__(msg)
        self.candidate = candidate


class EmptyCandidate(RuntimeError):
    pass


class NoStrategySucceeded(RuntimeError):
    def __init__(self, candidates):
        names = ", ".join(f"{c.strategy}: failed {c.report.failed()}" for c in candidates)
        super().__init__(f"no weak index pair strategy succeeded ({names})")
        self.candidates = candidates


# cell digraph ---------------------------------------------------------------------

def _value_cells(F, c, cache):
    tops = F.value_tops(c)
    got = cache.get(tops)
    if got is None:
        got = set()
        for t in tops:
            got |= faces(t)
        got = frozenset(got)
        cache[tops] = got
    return got


@dataclass
class TransitionDigraph:
    """Cells of a region and the arrows ``t -> s`` with ``s`` in ``cl F(t)``."""

    cells: list
    index: dict
    matrix: csr_matrix

    def successors(self, c) -> list:
        i = self.index[c]
        m = self.matrix
        return [self.cells[j] for j in m.indices[m.indptr[i]:m.indptr[i + 1]]]


def transition_digraph(F: CubicalMvMap, N: CubicalSet) -> TransitionDigraph:
    N = closure(N)
    cells = sorted(c for c in N.cells if c in F.domain.cells)
    index = {c: i for i, c in enumerate(cells)}
    rows, cols = [], []
    cache = {}
    for i, c in enumerate(cells):
        for s in _value_cells(F, c, cache):
            j = index.get(s)
            if j is not None:
                rows.append(i)
                cols.append(j)
    n = len(cells)
    m = csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))
    m.sort_indices()
    return TransitionDigraph(cells, index, m)


def _reach(m: csr_matrix, sources) -> np.ndarray:
    """Boolean mask of nodes reachable from ``sources`` (sources included)."""
    n = m.shape[0]
    mask = np.zeros(n, dtype=bool)
    if len(sources) == 0:
        return mask
    # a virtual root pointing at every source
    src = np.asarray(sources)
    ext = csr_matrix(
        (np.concatenate([m.data, np.ones(len(src), dtype=m.dtype)]),
         (np.concatenate([m.nonzero()[0], np.full(len(src), n)]),
          np.concatenate([m.nonzero()[1], src]))),
        shape=(n + 1, n + 1))
    order = breadth_first_order(ext, n, directed=True, return_predecessors=False)
    mask[order[order < n]] = True
    return mask


def recurrent_cells(F: CubicalMvMap, N: CubicalSet, graph: TransitionDigraph | None = None) -> list:
    """Nontrivial strongly connected components of the cell digraph, as cell lists."""
    g = graph or transition_digraph(F, N)
    m = g.matrix
    n = m.shape[0]
    if n == 0:
        return []
    ncomp, labels = connected_components(m, directed=True, connection="strong")
    sizes = np.bincount(labels, minlength=ncomp)
    r, c = m.nonzero()
    looped = set(labels[r[r == c]].tolist())
    return [[g.cells[i] for i in np.flatnonzero(labels == k)]
            for k in range(ncomp) if sizes[k] > 1 or k in looped]


def invariant_cells(F: CubicalMvMap, N: CubicalSet, graph: TransitionDigraph | None = None) -> frozenset:
    """Open cells of ``N`` lying on a bi-infinite path of the cell digraph."""
    g = graph or transition_digraph(F, N)
    m = g.matrix
    n = m.shape[0]
    if n == 0:
        return frozenset()
    ncomp, labels = connected_components(m, directed=True, connection="strong")
    sizes = np.bincount(labels, minlength=ncomp)
    loops = np.zeros(n, dtype=bool)
    r, c = m.nonzero()
    loops[r[r == c]] = True
    recurrent = np.flatnonzero((sizes[labels] > 1) | loops)
    fwd = _reach(m, recurrent)
    bwd = _reach(m.T.tocsr(), recurrent)
    return frozenset(g.cells[i] for i in np.flatnonzero(fwd & bwd))


def invariant_part_overapprox(F: CubicalMvMap, N: CubicalSet) -> CubicalSet:
    """Closure of the invariant cells; contains ``Inv(N, F)``."""
    N = closure(N)
    return closure(CubicalSet(invariant_cells(F, N), N.dim, N.level))


# isolating blocks -----------------------------------------------------------------

@dataclass
class IsolatingBlock:
    N: CubicalSet
    violations: list = field(default_factory=list)
    history: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def _block_core(F, N):
    """Open cells of ``N`` meeting ``F(N)`` and mapped into ``N``."""
    img = image(F, N).cells
    touch = set()
    for v in N.vertices():
        touch.update(grid.star_tops(v))
    return [c for c in N.cells
            if c in img and c in F.domain.cells and not touch.isdisjoint(F.value_tops(c))]


def is_isolating_block(F: CubicalMvMap, N: CubicalSet) -> IsolatingBlock:
    """Check ``N cap F(N) cap F^-1(N) subset int N`` cell by cell."""
    N = closure(N)
    inner = interior(N, F.domain_tops)
    bad = sorted(c for c in _block_core(F, N) if c not in inner)
    return IsolatingBlock(N, bad)


def close_return_seed(samples: SampleSet, periods, tol: float, geometry) -> CubicalSet:
    """Carriers of near-periodic stretches of a sampled trajectory.

    ``samples`` must come from one trajectory (sample ``i + 1`` starts where
    sample ``i`` ends).  A stretch of period ``p`` starting at ``i`` is kept
    when ``|x_{i+k+p} - x_{i+k}| < tol`` in the max norm for ``k < p`` and
    it is not also a close return for a proper divisor of ``p`` (so a fixed
    point does not count as period 3); the seed is the closure of the
    carriers of its ``p`` points.
    """
    X = np.asarray(samples.x, dtype=float)
    cells = set()
    for p in periods:
        n = len(X) - 2 * p + 1
        if n <= 0:
            continue
        def ret(q):
            e = np.zeros(n)
            for k in range(p):
                e = np.maximum(e, np.abs(X[q + k:q + k + n] - X[k:k + n]).max(axis=1))
            return e
        ok = ret(p) < tol
        for q in range(1, p):
            if p % q == 0:
                ok &= ret(q) >= tol
        for i in np.flatnonzero(ok):
            for k in range(p):
                cells.add(grid.bin_point(X[i + k], geometry))
    if not cells:
        raise EmptyCandidate(f"no close returns of period {list(periods)} within {tol}")
    return closure(CubicalSet(cells, geometry.dim, geometry.level))


def find_isolating_block(F: CubicalMvMap, seed: CubicalSet | None = None, budget: int = 60,
                         log=None, pair_ready: bool = True) -> IsolatingBlock:
    """Grow a candidate around the seed until it is an isolating block.

    The candidate starts as the one-cube collar of the seed.  At each step:
    if the invariant part touches the boundary, the candidate is replaced by
    the collar of the invariant part (this trims cubes off bi-infinite paths
    and grows where needed); otherwise the collar of every cell violating the
    block condition is added.  With ``pair_ready`` a block is also grown
    where the standard pair of ``block_pair`` would put a cell of
    ``P1 minus P2`` on the boundary.

    The domain of ``F`` is the phase space: collars stay inside it and
    interiors are taken relative to it, while value points outside it count
    as having left ``N``.
    """
    seed = F.domain if seed is None else closure(seed)
    if not seed.cells & F.domain.cells:
        raise EmptyCandidate("the seed misses the domain")
    N = _collar(seed.cells, F)
    history = []
    for it in range(budget):
        inv = invariant_cells(F, N)
        if not inv:
            raise EmptyCandidate("candidate lost its invariant part")
        inner = interior(N, F.domain_tops)
        stray = [c for c in inv if c not in inner]
        if stray:
            nxt = _collar(inv, F)
            why = f"invariant part touches the boundary at {len(stray)} cells"
        else:
            blk = is_isolating_block(F, N)
            if blk.ok:
                bad = _pair_conflicts(F, N, inv) if pair_ready else []
                if not bad:
                    blk.history = history + [(it, len(N.tops()), "block")]
                    return blk
                nxt = closure(N | _collar(bad, F))
                why = f"{len(bad)} pair conflicts"
            else:
                nxt = closure(N | _collar(blk.violations, F))
                why = f"{len(blk.violations)} block violations"
        history.append((it, len(N.tops()), why))
        if log:
            log(f"block search step {it}: {len(N.tops())} cubes, {why}")
        if nxt == N:
            raise BudgetExceeded("block search reached a fixed point without success", N)
        N = nxt
    raise BudgetExceeded(f"no isolating block within {budget} steps", N)


def _collar(cells, F) -> CubicalSet:
    """Domain cubes touching ``cells``."""
    dom = F.domain_tops
    tops = set()
    for c in cells:
        for v in grid.cell_vertices(c):
            tops.update(t for t in grid.star_tops(v) if t in dom)
    return CubicalSet.from_tops(tops, F.dim, F.level)


def block_pair(F: CubicalMvMap, N: CubicalSet, inv=None) -> tuple:
    """Pair ``(P1, P2)`` for an isolating block ``N``.

    ``P1`` is ``F(N) cap N`` together with the closed star of every invariant
    cell, so invariant cells are interior to ``P1``.  ``P2`` is the closure of
    the cells of ``P1`` on the boundary of ``N`` whose value misses ``N``;
    for a block this includes all of ``F(N)`` on the boundary.
    """
    N = closure(N)
    if inv is None:
        inv = invariant_cells(F, N)
    FN = image(F, N) & N
    tops = set()
    for c in inv:
        tops.update(t for t in grid.star_tops(c) if t in F.domain_tops)
    P1 = closure(FN | CubicalSet.from_tops(tops, N.dim, N.level))
    inner = interior(N, F.domain_tops)
    touch = touching_tops(N)
    exits = (c for c in P1.cells if c not in inner and touch.isdisjoint(F.value_tops(c)))
    P2 = closure(CubicalSet(exits, N.dim, N.level))
    return P1, P2


def _pair_conflicts(F, N, inv):
    P1, P2 = block_pair(F, N, inv)
    inner = interior(N, F.domain_tops)
    return sorted(c for c in P1.cells - P2.cells if c not in inner)


# weak index pairs ----------------------------------------------------------------

@dataclass
class PairReport:
    a: bool
    b: bool
    c: bool
    d: bool
    witnesses: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.a and self.b and self.c and self.d

    def failed(self) -> list:
        return [k for k in "abcd" if not getattr(self, k)]

    def __bool__(self):
        return self.ok

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in "abcd"}


@dataclass
class IndexPair:
    P1: CubicalSet
    P2: CubicalSet
    N: CubicalSet
    report: PairReport
    strategy: str = ""


def verify_weak_index_pair(F: CubicalMvMap, N: CubicalSet, P1: CubicalSet, P2: CubicalSet,
                           inv: frozenset | None = None) -> PairReport:
    """Exact cell-level check of conditions (a)-(d)."""
    N, P1, P2 = closure(N), closure(P1), closure(P2)
    if not (P2.cells <= P1.cells <= N.cells):
        raise ValueError("need P2 <= P1 <= N")
    w = {}
    img1 = image(F, P1)
    img2 = image(F, P2)
    bad_a = sorted((img1.cells & N.cells) - P1.cells) + sorted((img2.cells & N.cells) - P2.cells)
    w["a"] = bad_a[:10]
    out = CubicalSet(img1.cells - P1.cells, N.dim, N.level)
    bdF = closure(out).cells & P1.cells
    bad_b = sorted(bdF - P2.cells)
    w["b"] = bad_b[:10]
    if inv is None:
        inv = invariant_cells(F, N)
    intP1 = interior(P1, F.domain_tops)
    bad_c = sorted(c for c in inv if c not in intP1 or c in P2.cells)
    w["c"] = bad_c[:10]
    intN = interior(N, F.domain_tops)
    bad_d = sorted(c for c in P1.cells - P2.cells if c not in intN)
    w["d"] = bad_d[:10]
    return PairReport(not bad_a, not bad_b, not bad_c, not bad_d, w)


def saturate(F: CubicalMvMap, start: CubicalSet, N: CubicalSet, within: CubicalSet | None = None) -> CubicalSet:
    """Smallest closed ``S`` containing ``start`` with ``F(S) cap N subset S`` (cut to ``within``)."""
    N = closure(N)
    lim = N.cells if within is None else closure(within).cells
    cells = set(closure(start).cells)
    todo = sorted(cells)
    cache = {}
    while todo:
        nxt = []
        for c in todo:
            for s in _value_cells(F, c, cache):
                if s in lim and s not in cells:
                    cells.add(s)
                    nxt.append(s)
        todo = sorted(nxt)
    return CubicalSet(cells, N.dim, N.level)


def _strategies(F, N, inv):
    d, lvl = N.dim, N.level
    FN = image(F, N)
    intN = interior(N, F.domain_tops)
    P1 = FN & N
    B1, B2 = block_pair(F, N, inv)
    yield "block", B1, B2
    # block pair with its exit set saturated forward inside P1
    yield "block-saturated", B1, saturate(F, B2, N, within=B1)
    # S1: exit set = cells of P1 whose value misses N, saturated forward
    miss = CubicalSet((c for c in P1.cells if c in F.domain.cells and
                       _value_cells(F, c, {}).isdisjoint(N.cells)), d, lvl)
    yield "S1", P1, saturate(F, miss, N, within=P1)
    # S2: saturate the invariant part, then the part of its image leaving int N
    S = closure(CubicalSet(inv, d, lvl))
    Q1 = saturate(F, S, N)
    outside = CubicalSet((c for c in image(F, Q1).cells if c not in intN), d, lvl)
    Q2 = saturate(F, closure(outside) & Q1, N, within=Q1)
    yield "S2", Q1, Q2


def build_weak_index_pair(F: CubicalMvMap, N: CubicalSet, strategies=None) -> IndexPair:
    """Try the candidate constructions in order; return the first verified pair."""
    N = closure(N)
    inv = invariant_cells(F, N)
    tried = []
    for name, P1, P2 in _strategies(F, N, inv):
        if strategies is not None and name not in strategies:
            continue
        P1, P2 = closure(P1), closure(P2)
        if not P2.cells <= P1.cells:
            P2 = P2 & P1
        rep = verify_weak_index_pair(F, N, P1, P2, inv)
        pair = IndexPair(P1, P2, N, rep, name)
        if rep.ok:
            return pair
        tried.append(pair)
    raise NoStrategySucceeded(tried)


def restrict_to_components(N: CubicalSet, P1: CubicalSet, P2: CubicalSet, which) -> tuple:
    """``N_I`` for the chosen component indices and ``Q = P cap N_I``."""
    N = closure(N)
    parts = components(N)
    keep = set()
    for i in sorted(set(which)):
        keep |= parts[i].cells
    NI = CubicalSet(keep, N.dim, N.level)
    return NI, P1 & NI, P2 & NI
