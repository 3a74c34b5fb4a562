"""Shared test data, random-object strategies and independent oracles.

The oracles here deliberately avoid the package's own algorithms: boundary
matrices are rebuilt from scratch, ranks and Smith forms come from sympy,
and hull-versus-cube intersection is decided by exact vertex enumeration.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

from hypothesis import strategies as st

from sampledconley.grid import Cell, CubicalSet, GridGeometry, closure
from sampledconley.mvmap import TableMap

# reference data ----------------------------------------------------------------------

# cohomological index matrices as printed, and component -> generator tables
REF_P3 = [[0, 0, -1, 0, 0], [-1, 0, 0, 0, 0], [0, -1, 0, 0, -1], [0, 0, 1, 0, 0], [0, 0, 0, -1, 0]]
REF_T3 = {1: [2], 2: [5], 3: [3], 4: [1], 5: [4]}
REF_A3 = [[0, 0, 0, 1, 0], [0, 0, 0, 0, 1], [1, 1, 0, 0, 0], [0, 0, 1, 0, 0], [0, 0, 1, 0, 0]]

REF_P2 = [[0, 0, 0, 0, 0, 1, 0], [0, 0, -1, 0, 0, 0, 0], [0, 0, 0, -1, 0, 0, -1],
            [0, 0, 0, 0, -1, 0, 0], [0, 0, 0, 0, 0, 0, -1], [0, 0, -1, 0, 0, 0, 0],
            [-1, 0, 0, 0, 0, 0, 0]]
REF_T2 = {1: [2, 6], 2: [7], 3: [4], 4: [1], 5: [5], 6: [3]}
REF_A2 = [[0, 0, 0, 0, 0, 1], [0, 0, 0, 1, 0, 0], [0, 0, 0, 0, 1, 0],
            [1, 0, 0, 0, 0, 0], [0, 1, 0, 0, 0, 0], [0, 1, 1, 0, 0, 0]]


def reference_index(which: int):
    """Homological index map and decomposition for the published 3D (3) or 2D (2) data."""
    from sampledconley.homology import GradedEndomorphism
    from sampledconley.symbolic import Decomposition
    P, T, n = (REF_P3, REF_T3, 5) if which == 3 else (REF_P2, REF_T2, 6)
    return GradedEndomorphism({1: P}).transpose(), Decomposition.from_table(n, T)


# random cubical objects -------------------------------------------------------------

def box_tops(lo, hi):
    return list(itertools.product(*[range(a, b + 1) for a, b in zip(lo, hi)]))


@st.composite
def cubical_sets(draw, d=None, n=4, min_tops=1, max_tops=None):
    d = d or draw(st.integers(1, 3))
    box = box_tops([0] * d, [n - 1] * d)
    tops = draw(st.lists(st.sampled_from(box), min_size=min_tops,
                         max_size=max_tops or len(box), unique=True))
    return CubicalSet.from_tops(tops, d)


@st.composite
def cubical_pairs(draw, max_cells=200):
    """Closed ``P2 <= P1`` with at most ``max_cells`` cells in ``P1``."""
    d = draw(st.integers(1, 3))
    n = {1: 8, 2: 4, 3: 3}[d]
    P1 = draw(cubical_sets(d=d, n=n))
    while len(P1) > max_cells:
        P1 = CubicalSet.from_tops(sorted(P1.tops())[:-1], d)
    cells = sorted(P1.cells)
    sub = draw(st.lists(st.sampled_from(cells), max_size=len(cells), unique=True))
    return P1, closure(CubicalSet(sub, d))


@st.composite
def box_valued_maps(draw, d=None, n=5, spread=2):
    """Cubical usc map on the full box ``[0, n]^d``: each top cube goes to a random box.

    Lower cells get the union over their star (``TableMap`` default), so values
    need not be acyclic.  Boxes stay near the diagonal half of the time so that
    block searches find something to isolate.
    """
    d = d or draw(st.integers(1, 2))
    vals = {}
    for t in box_tops([0] * d, [n - 1] * d):
        if draw(st.booleans()):
            lo = [min(n - 1, max(0, x + draw(st.integers(-1, 1)))) for x in t]
        else:
            lo = [draw(st.integers(0, n - 1)) for _ in t]
        hi = [min(n - 1, a + draw(st.integers(0, spread - 1))) for a in lo]
        vals[t] = box_tops(lo, hi)
    return TableMap(GridGeometry(d, 1.0), vals)


@st.composite
def interval_walk(draw, n, lo_bound=-2, hi_bound=None):
    """Intervals ``I(0..n-1)`` of top indices whose consecutive closed unions are intervals."""
    hi_bound = n + 1 if hi_bound is None else hi_bound
    c = draw(st.integers(max(0, lo_bound), min(n - 1, hi_bound)))
    out = []
    for _ in range(n):
        w = draw(st.integers(0, max(0, min(2, hi_bound - c))))
        out.append((c, c + w))
        c = min(hi_bound, max(lo_bound, c + draw(st.integers(-1, 1))))
    return out


@st.composite
def product_interval_maps(draw, d=None, n=None, inside=False):
    """Acyclic-valued cubical map: a product of 1D interval maps on the box ``[0, n]^d``.

    Neighbouring intervals touch, so every union over a star or a closed cell is
    again a product of intervals, hence a contractible box.  With ``inside``
    all values stay in the box, so the map is a self-map of its domain.
    """
    d = d or draw(st.integers(1, 3))
    n = n or draw(st.integers(2, {1: 10, 2: 5, 3: 3}[d]))
    bounds = (0, n - 1) if inside else (-2, n + 1)
    axes = [draw(interval_walk(n, *bounds)) for _ in range(d)]
    vals = {}
    for t in box_tops([0] * d, [n - 1] * d):
        lo = [axes[i][t[i]][0] for i in range(d)]
        hi = [axes[i][t[i]][1] for i in range(d)]
        vals[t] = box_tops(lo, hi)
    return TableMap(GridGeometry(d, 1.0), vals)


def thinned(F: TableMap, draw) -> TableMap:
    """A sub-map ``G <= F``: each top value shrinks to a random nonempty subset."""
    vals = {}
    for t, v in sorted(F.table.items()):
        v = sorted(v)
        keep = draw(st.lists(st.sampled_from(v), min_size=1, max_size=len(v), unique=True))
        vals[t.base] = [c.base for c in keep]
    return TableMap(F.geometry, vals)


# homology oracle ------------------------------------------------------------------

def _axes(c: Cell):
    return [i for i in range(len(c.base)) if c.extent >> i & 1]


def oracle_boundary(c: Cell) -> dict:
    """Cubical boundary ``sum_j (-1)^j (upper_j - lower_j)`` over the spanned axes."""
    out = {}
    for j, i in enumerate(_axes(c)):
        s = -1 if j % 2 else 1
        ext = c.extent & ~(1 << i)
        up = list(c.base)
        up[i] += 1
        out[Cell(c.base, ext)] = out.get(Cell(c.base, ext), 0) - s
        out[Cell(tuple(up), ext)] = out.get(Cell(tuple(up), ext), 0) + s
    return out


def oracle_homology(P1: CubicalSet, P2: CubicalSet):
    """Betti numbers and torsion of ``C(P1)/C(P2)`` via sympy Smith forms over Z."""
    import sympy
    from sympy.matrices.normalforms import smith_normal_form

    cells = sorted(set(P1.cells) - set(P2.cells))
    d = P1.dim
    by = [[c for c in cells if c.dim == k] for k in range(d + 1)]
    idx = [{c: i for i, c in enumerate(b)} for b in by]
    ranks, tors = [0] * (d + 2), [[] for _ in range(d + 2)]
    for k in range(1, d + 1):
        if not by[k] or not by[k - 1]:
            continue
        M = sympy.zeros(len(by[k - 1]), len(by[k]))
        for j, c in enumerate(by[k]):
            for f, a in oracle_boundary(c).items():
                if f in idx[k - 1]:
                    M[idx[k - 1][f], j] += a
        S = smith_normal_form(M, domain=sympy.ZZ)
        diag = [abs(int(S[i, i])) for i in range(min(S.shape)) if S[i, i] != 0]
        ranks[k] = len(diag)
        tors[k] = sorted(x for x in diag if x > 1)
    betti = [len(by[k]) - ranks[k] - ranks[k + 1] for k in range(d + 1)]
    return betti, [tors[k + 1] for k in range(d + 1)]


# exact hull-versus-cube oracle -----------------------------------------------------

def _solve(cols, rhs):
    """Unique solution of ``sum x_j cols[j] = rhs`` (columns independent), else None."""
    m, n = len(rhs), len(cols)
    A = [[cols[j][i] for j in range(n)] + [rhs[i]] for i in range(m)]
    r, piv = 0, []
    for j in range(n):
        p = next((i for i in range(r, m) if A[i][j] != 0), None)
        if p is None:
            return None
        A[r], A[p] = A[p], A[r]
        A[r] = [x / A[r][j] for x in A[r]]
        for i in range(m):
            if i != r and A[i][j] != 0:
                f = A[i][j]
                A[i] = [x - f * y for x, y in zip(A[i], A[r])]
        piv.append(j)
        r += 1
    if any(A[i][n] != 0 for i in range(r, m)):
        return None
    return [A[i][n] for i in range(n)]


def _independent(vecs) -> bool:
    if not vecs:
        return True
    m = len(vecs[0])
    rows = [list(v) for v in vecs]
    rank = 0
    for j in range(m):
        p = next((i for i in range(rank, len(rows)) if rows[i][j] != 0), None)
        if p is None:
            continue
        rows[rank], rows[p] = rows[p], rows[rank]
        for i in range(rank + 1, len(rows)):
            f = rows[i][j] / rows[rank][j]
            rows[i] = [x - f * y for x, y in zip(rows[i], rows[rank])]
        rank += 1
    return rank == len(vecs)


def in_hull(x, pts) -> bool:
    """Point in the convex hull, via affinely independent subsets (Caratheodory)."""
    d = len(x)
    for m in range(1, min(d + 1, len(pts)) + 1):
        for sub in itertools.combinations(pts, m):
            q0 = sub[0]
            cols = [[a - b for a, b in zip(q, q0)] for q in sub[1:]]
            if not _independent(cols):
                continue
            lam = _solve(cols, [a - b for a, b in zip(x, q0)]) if cols else (
                [] if tuple(x) == tuple(q0) else None)
            if lam is not None and all(l >= 0 for l in lam) and sum(lam) <= 1:
                return True
    return False


def segment_meets_box(p, q, lo, hi) -> bool:
    """Exact Liang-Barsky clip of the closed segment against a closed box."""
    t0, t1 = Fraction(0), Fraction(1)
    for a, b, l, h in zip(p, q, lo, hi):
        dv = b - a
        if dv == 0:
            if a < l or a > h:
                return False
            continue
        ta, tb = (l - a) / dv, (h - a) / dv
        if ta > tb:
            ta, tb = tb, ta
        t0, t1 = max(t0, ta), min(t1, tb)
        if t0 > t1:
            return False
    return True


def _cross(u, v):
    return [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]]


def _dot(u, v):
    return sum(a * b for a, b in zip(u, v))


def _edge_crosses_triangle(e0, e1, a, b, c) -> bool:
    ab = [y - x for x, y in zip(a, b)]
    ac = [y - x for x, y in zip(a, c)]
    nrm = _cross(ab, ac)
    if not any(nrm):
        return False
    s0 = _dot(nrm, [y - x for x, y in zip(a, e0)])
    s1 = _dot(nrm, [y - x for x, y in zip(a, e1)])
    if not ((s0 < 0 < s1) or (s1 < 0 < s0)):
        return False
    t = s0 / (s0 - s1)
    x = [u + t * (v - u) for u, v in zip(e0, e1)]
    return in_hull(x, [a, b, c])


def hull_meets_cube(pts, base) -> bool:
    """Whether ``conv(pts)`` meets the closed unit cube at ``base`` (exact, d <= 3).

    A nonempty intersection of two polytopes has a vertex; each vertex is a
    point of one polytope inside the other, or an edge of one crossing a face
    of the other.  All pairs and triples of points cover the hull's edges and
    triangulated faces.
    """
    d = len(base)
    lo = [Fraction(b) for b in base]
    hi = [Fraction(b + 1) for b in base]
    pts = [tuple(Fraction(x) for x in p) for p in pts]
    if any(all(l <= x <= h for x, l, h in zip(p, lo, hi)) for p in pts):
        return True
    for p, q in itertools.combinations(pts, 2):
        if segment_meets_box(p, q, lo, hi):
            return True
    pmin = [min(p[i] for p in pts) for i in range(d)]
    pmax = [max(p[i] for p in pts) for i in range(d)]
    for corner in itertools.product(*zip(lo, hi)):
        if all(a <= x <= b for x, a, b in zip(corner, pmin, pmax)) and in_hull(corner, pts):
            return True
    if d == 3:
        corners = list(itertools.product(*zip(lo, hi)))
        box_edges = [(u, v) for u, v in itertools.combinations(corners, 2)
                     if sum(x != y for x, y in zip(u, v)) == 1]
        for a, b, c in itertools.combinations(pts, 3):
            for u, v in box_edges:
                if _edge_crosses_triangle(u, v, a, b, c):
                    return True
    return False


def oracle_rasterize(pts) -> set:
    d = len(pts[0])
    # a closed unit cube meeting the hull meets its bounding box
    lo = [math.floor(min(p[i] for p in pts)) - 1 for i in range(d)]
    hi = [math.floor(max(p[i] for p in pts)) for i in range(d)]
    return {b for b in box_tops(lo, hi) if hull_meets_cube(pts, b)}
