"""Component-block algebra of an index map: transition matrices, orbit
certificates, Lefschetz-completeness and subshift entropy.

Conventions.  Index maps here are homological (columns are images of basis
vectors).  For a decomposition into components, the block from component ``i``
to component ``j`` is ``B(j<-i) = pi_j I iota_i`` and ``A[i][j] = 1`` iff that
block is nonzero, so ``A`` is read in time order: a step from ``N_i`` to ``N_j``.
The cohomological index map is the transpose; passing it through
``GradedEndomorphism.transpose`` first gives the same ``A``.

Words are tuples of 1-based component labels.  For a word ``s`` the
composition ``h_{s_{p-1}} ... h_{s_0}`` with ``h_i = I E_i`` (``E_i`` the
projector onto component ``i``) has the same trace as the cohomological
``g_{s_0} ... g_{s_{p-1}}``; that trace is what the certificates record.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import qmat
from .homology import GradedEndomorphism


class BasisMismatch(ValueError):
    pass


class NotAdmissible(ValueError):
    pass


# decompositions --------------------------------------------------------------------

@dataclass
class Decomposition:
    """Assignment of basis vectors to components, per degree (0-based components)."""
    n: int
    assign: dict

    def __post_init__(self):
        self.assign = {int(k): list(v) for k, v in self.assign.items()}
        for k, v in self.assign.items():
            if any(not 0 <= c < self.n for c in v):
                raise BasisMismatch(f"degree {k}: component label out of range")

    @classmethod
    def from_table(cls, n: int, table: dict, degree: int = 1) -> "Decomposition":
        """``table`` maps a 1-based component to the 1-based generators it contains."""
        size = sum(len(v) for v in table.values())
        assign = [None] * size
        for comp, gens in table.items():
            for g in gens:
                if not 1 <= g <= size:
                    raise BasisMismatch(f"generator {g} out of range 1..{size}")
                if assign[g - 1] is not None:
                    raise BasisMismatch(f"generator {g} listed twice")
                assign[g - 1] = comp - 1
        if any(a is None for a in assign):
            raise BasisMismatch("generators missing from table")
        return cls(n, {degree: assign})

    @classmethod
    def from_supports(cls, components: list, basis) -> "Decomposition":
        """Assign each generator of ``basis`` to the component holding its support."""
        owner = {}
        for i, comp in enumerate(components):
            for c in comp.cells:
                owner[c] = i
        assign = {}
        for k, b in enumerate(basis.betti):
            row = []
            for n in range(b):
                where = {owner.get(c) for c in basis.generator(k, n)}
                if len(where) != 1 or None in where:
                    raise BasisMismatch(f"generator {n} in degree {k} spans components {sorted(map(str, where))}")
                row.append(where.pop())
            assign[k] = row
        return cls(len(components), assign)

    def dims(self, k) -> list:
        v = self.assign.get(k, [])
        return [v.count(i) for i in range(self.n)]

    def indices(self, k, i) -> list:
        return [m for m, c in enumerate(self.assign.get(k, [])) if c == i]

    def pi(self, k, i) -> list:
        v = self.assign.get(k, [])
        idx = self.indices(k, i)
        return [[Fraction(int(m == r)) for m in range(len(v))] for r in idx]

    def iota(self, k, i) -> list:
        return qmat.transpose(self.pi(k, i)) if self.indices(k, i) else [[] for _ in self.assign.get(k, [])]

    def projector(self, k, i) -> list:
        v = self.assign.get(k, [])
        return [[Fraction(int(r == m and c == i)) for m in range(len(v))] for r, c in enumerate(v)]

    def check(self, I: GradedEndomorphism):
        for k in I.degrees():
            if len(self.assign.get(k, [])) != len(I[k]):
                raise BasisMismatch(f"degree {k}: map has size {len(I[k])}, decomposition {len(self.assign.get(k, []))}")


def _block(I, D, k, j, i) -> list:
    rows, cols = D.indices(k, j), D.indices(k, i)
    M = I[k]
    return [[M[r][c] for c in cols] for r in rows]


def blocks(I: GradedEndomorphism, D: Decomposition) -> dict:
    """``{(i, j): {k: B(j<-i) in degree k}}`` for nonzero blocks, 0-based."""
    D.check(I)
    out = {}
    for k in I.degrees():
        for i in range(D.n):
            for j in range(D.n):
                B = _block(I, D, k, j, i)
                if B and B[0] and not qmat.is_zero(B):
                    out.setdefault((i, j), {})[k] = B
    return out


def transition_matrix(I: GradedEndomorphism, D: Decomposition) -> np.ndarray:
    A = np.zeros((D.n, D.n), dtype=np.int8)
    for (i, j) in blocks(I, D):
        A[i, j] = 1
    return A


def edges(A) -> list:
    """1-based edge list of a 0/1 matrix."""
    A = np.asarray(A)
    return [(int(i) + 1, int(j) + 1) for i, j in zip(*np.nonzero(A))]


def graph_isomorphic(A, B) -> bool:
    """Digraph isomorphism of two 0/1 matrices by degree-pruned backtracking."""
    A, B = np.asarray(A, dtype=bool), np.asarray(B, dtype=bool)
    n = len(A)
    if B.shape != A.shape or A.sum() != B.sum():
        return False
    sig = lambda M, v: (int(M[v].sum()), int(M[:, v].sum()), bool(M[v, v]))
    sa, sb = [sig(A, v) for v in range(n)], [sig(B, v) for v in range(n)]
    if sorted(sa) != sorted(sb):
        return False
    m = [None] * n
    used = [False] * n

    def rec(v):
        if v == n:
            return True
        for w in range(n):
            if used[w] or sa[v] != sb[w]:
                continue
            if all(A[v, u] == B[w, m[u]] and A[u, v] == B[m[u], w] for u in range(v)):
                m[v], used[w] = w, True
                if rec(v + 1):
                    return True
                used[w] = False
        m[v] = None
        return False

    return rec(0)


# g-maps and I_sigma ----------------------------------------------------------------

def g_endos(I: GradedEndomorphism, D: Decomposition) -> list:
    """``h_i = I E_i`` for each component (homological form of ``g_i``)."""
    D.check(I)
    return [GradedEndomorphism({k: qmat.matmul(I[k], D.projector(k, i)) for k in I.degrees()})
            for i in range(D.n)]


def word_composition(I: GradedEndomorphism, D: Decomposition, word) -> GradedEndomorphism:
    """``h_{s_{p-1}} ... h_{s_0}`` for a 1-based word ``s``."""
    hs = g_endos(I, D)
    out = {k: qmat.identity(len(I[k])) for k in I.degrees()}
    for s in word:
        out = {k: qmat.matmul(hs[s - 1][k], m) for k, m in out.items()}
    return GradedEndomorphism(out)


def i_sigma(I: GradedEndomorphism, D: Decomposition, word) -> GradedEndomorphism:
    """Block-cyclic map on the sum of ``V_{s_0}, ..., V_{s_{p-1}}``.

    Slot ``t`` is sent to slot ``t+1 mod p`` by ``pi_{s_{t+1}} I iota_{s_t}``.
    """
    D.check(I)
    p = len(word)
    out = {}
    for k in I.degrees():
        sizes = [len(D.indices(k, s - 1)) for s in word]
        off = [sum(sizes[:t]) for t in range(p)]
        n = sum(sizes)
        M = qmat.zeros(n)
        for t in range(p):
            u = (t + 1) % p
            B = _block(I, D, k, word[u] - 1, word[t] - 1)
            for r, row in enumerate(B):
                for c, x in enumerate(row):
                    M[off[u] + r][off[t] + c] += x
        out[k] = M
    return GradedEndomorphism(out)


def graded_lefschetz(G: GradedEndomorphism) -> Fraction:
    """Alternating trace sum; equals the generalized Lefschetz number."""
    return sum(((-1) ** k * qmat.trace(G[k]) for k in G.degrees()), Fraction(0))


def _nilpotent(G: GradedEndomorphism) -> bool:
    return all(qmat.is_zero(qmat.mat_pow(G[k], len(G[k]))) for k in G.degrees())


# certificates ----------------------------------------------------------------------

CITE_TRAJECTORY = "non-nilpotent composition of component maps implies a trajectory visiting the components in order"
CITE_PERIODIC = "nonzero Lefschetz number of the composition implies a periodic point with that itinerary"
CITE_SEMICONJ = "Lefschetz-complete index map implies a semiconjugacy onto the subshift of finite type"


@dataclass
class OrbitCertificate:
    word: tuple
    kind: str  # periodic | trajectory | none | semiconjugacy
    evidence: dict = field(default_factory=dict)
    citation: str = ""

    def to_json(self) -> dict:
        return dict(word=list(self.word), kind=self.kind, evidence=self.evidence, citation=self.citation)


def is_admissible(A, word, cyclic=True) -> bool:
    A = np.asarray(A)
    p = len(word)
    steps = range(p if cyclic else p - 1)
    return all(A[word[t] - 1, word[(t + 1) % p] - 1] for t in steps)


def certify_word(I: GradedEndomorphism, D: Decomposition, word, A=None) -> OrbitCertificate:
    word = tuple(int(s) for s in word)
    if A is None:
        A = transition_matrix(I, D)
    if any(not 1 <= s <= D.n for s in word) or not is_admissible(A, word):
        raise NotAdmissible(f"word {word} is not admissible as a cyclic word")
    G = word_composition(I, D, word)
    lam = graded_lefschetz(G)
    ev = {"lefschetz": qmat.frac_str(lam), "composition": G.to_json()}
    if lam != 0:
        return OrbitCertificate(word, "periodic", ev, CITE_PERIODIC)
    if not _nilpotent(G):
        return OrbitCertificate(word, "trajectory", ev, CITE_TRAJECTORY)
    ev["nilpotent"] = True
    return OrbitCertificate(word, "none", ev, "")


def _min_rotation(w) -> tuple:
    return min(tuple(w[i:] + w[:i]) for i in range(len(w)))


def enumerate_admissible(A, maxlen: int) -> list:
    """Admissible cyclic words up to rotation, each as its least rotation, 1-based."""
    A = np.asarray(A)
    n = len(A)
    out = set()
    # a cyclic word's least rotation starts at its least letter: walk from each start
    for s in range(n):
        stack = [(s,)]
        while stack:
            w = stack.pop()
            if A[w[-1], s] and _min_rotation(list(w)) == w:
                out.add(tuple(x + 1 for x in w))
            if len(w) < maxlen:
                for t in range(s, n):
                    if A[w[-1], t]:
                        stack.append(w + (t,))
    return sorted(out, key=lambda w: (len(w), w))


# Lefschetz-completeness ------------------------------------------------------------

@dataclass
class CompletenessResult:
    verdict: str  # complete | counterexample | inconclusive
    word: tuple | None = None
    products: int = 0
    max_length: int = 0

    def to_json(self) -> dict:
        return dict(verdict=self.verdict, word=list(self.word) if self.word else None,
                    products=self.products, max_length=self.max_length)


def _key(mats) -> tuple:
    return tuple((k, tuple(tuple(r) for r in m)) for k, m in mats)


def lefschetz_completeness(I: GradedEndomorphism, D: Decomposition, budget: int = 10_000,
                           max_length: int = 64) -> CompletenessResult:
    """Semigroup closure of labelled path products.

    Elements are ``(start, end, product)``, the product of blocks along an
    admissible path.  Closing the set under one-step extension enumerates every
    product any admissible word can produce; each element with ``start == end``
    is a closed loop whose trace gives the Lefschetz number of the associated
    cyclic composition, which must not vanish.
    """
    bl = blocks(I, D)
    degs = I.degrees()
    step = {}
    for (i, j), m in bl.items():
        step.setdefault(i, []).append((j, m))
    seen = {}
    queue = deque()

    def push(s, e, mats, word):
        key = (s, e, _key(mats))
        if key in seen:
            return True
        seen[key] = word
        if len(seen) > budget:
            return False
        queue.append((s, e, mats, word))
        return True

    for (i, j), m in sorted(bl.items()):
        mats = [(k, m.get(k) or qmat.zeros(len(D.indices(k, j)), len(D.indices(k, i)))) for k in degs]
        if not push(i, j, mats, (i + 1, j + 1)):
            return CompletenessResult("inconclusive", None, len(seen), 1)
    longest = 1
    while queue:
        s, e, mats, word = queue.popleft()
        longest = max(longest, len(word) - 1)
        if s == e:
            lam = sum(((-1) ** k * qmat.trace(m) for k, m in mats if m), Fraction(0))
            if lam == 0:
                return CompletenessResult("counterexample", word[:-1], len(seen), len(word) - 1)
        if len(word) - 1 >= max_length:
            return CompletenessResult("inconclusive", None, len(seen), max_length)
        for j, m in step.get(e, []):
            nm = []
            for k, M in mats:
                B = m.get(k) or qmat.zeros(len(D.indices(k, j)), len(D.indices(k, e)))
                nm.append((k, qmat.matmul(B, M) if B and M and M[0] else
                           qmat.zeros(len(D.indices(k, j)), len(D.indices(k, s)))))
            if not push(s, j, nm, word + (j + 1,)):
                return CompletenessResult("inconclusive", None, len(seen), len(word))
    return CompletenessResult("complete", None, len(seen), longest)


# entropy ---------------------------------------------------------------------------

@dataclass
class EntropyBound:
    spectral_radius: float
    lower: float
    upper: float
    charpoly: list | None = None
    charpoly_root: float | None = None

    @property
    def entropy(self) -> float:
        return math.log(self.spectral_radius) if self.spectral_radius > 0 else 0.0

    def to_json(self) -> dict:
        return dict(spectral_radius=self.spectral_radius, entropy=self.entropy,
                    bracket=[self.lower, self.upper],
                    charpoly=[qmat.frac_str(c) for c in self.charpoly] if self.charpoly else None,
                    charpoly_root=self.charpoly_root)


def _perron_irreducible(M, tol):
    """Collatz-Wielandt bracket for an irreducible nonnegative matrix.

    Iterates with ``M + I`` (aperiodic, Perron root shifted by one) so that
    periodic components converge too.
    """
    n = len(M)
    S = M + np.eye(n)
    x = np.ones(n)
    lo, hi = 0.0, np.inf
    for _ in range(100_000):
        y = S @ x
        r = y / x
        lo, hi = max(lo, r.min()), min(hi, r.max())
        if hi - lo <= tol:
            break
        x = y / y.max()
    return lo - 1.0, hi - 1.0


def spectral_radius_bracket(A, tol: float = 1e-9):
    A = np.asarray(A, dtype=float)
    n = len(A)
    if n == 0:
        return 0.0, 0.0
    ncomp, labels = connected_components(csr_matrix(A), directed=True, connection="strong")
    lo = hi = 0.0
    for c in range(ncomp):
        idx = np.flatnonzero(labels == c)
        M = A[np.ix_(idx, idx)]
        if not M.any():
            continue
        l, h = _perron_irreducible(M, tol)
        lo, hi = max(lo, l), max(hi, h)
    return lo, hi


def _squarefree(p) -> list:
    """``p / gcd(p, p')``: same roots, all simple, so numerical rooting is well conditioned."""
    dp = qmat.ptrim([i * c for i, c in enumerate(p)][1:])
    a, b = qmat.ptrim(list(p)), dp
    while b and any(b):
        a, b = b, qmat.ptrim(qmat.pdivmod(a, b)[1])
    q, r = qmat.pdivmod(qmat.ptrim(list(p)), qmat.pmonic(a))
    return qmat.ptrim(q)


def entropy_lower_bound(A, tol: float = 1e-9) -> EntropyBound:
    """Logarithm of the spectral radius of a 0/1 matrix, with exact cross-check for n <= 8."""
    A = np.asarray(A)
    lo, hi = spectral_radius_bracket(A, tol)
    rho = 0.5 * (lo + hi)
    cp = root = None
    if len(A) <= 8:
        cp = qmat.charpoly(qmat.mat(A.tolist()))
        sf = _squarefree(cp)
        roots = np.roots([float(c) for c in reversed(sf)]) if len(sf) > 1 else np.array([])
        root = float(max(abs(roots))) if len(roots) else 0.0
        if abs(root - rho) > 1e-6:
            raise ArithmeticError(f"power iteration {rho} disagrees with characteristic polynomial root {root}")
    return EntropyBound(float(rho), float(lo), float(hi), cp, root)


# semiconjugacy ---------------------------------------------------------------------

def semiconjugacy_certificate(I: GradedEndomorphism, D: Decomposition, maxlen: int = 8,
                              budget: int = 10_000, max_length: int = 64) -> dict:
    A = transition_matrix(I, D)
    comp = lefschetz_completeness(I, D, budget, max_length)
    words = enumerate_admissible(A, maxlen)
    certs = [certify_word(I, D, w, A) for w in words]
    return dict(
        transition_matrix=A.tolist(),
        completeness=comp.to_json(),
        kind="semiconjugacy" if comp.verdict == "complete" else "none",
        citation=CITE_SEMICONJ if comp.verdict == "complete" else "",
        periodic=[c.to_json() for c in certs],
        all_periodic=all(c.kind == "periodic" for c in certs),
    )


def to_dot(A, labels=None) -> str:
    A = np.asarray(A)
    n = len(A)
    labels = labels or [f"N{i + 1}" for i in range(n)]
    lines = ["digraph transitions {"]
    for i in range(n):
        lines.append(f'  {i + 1} [label="{labels[i]}"];')
    for i, j in edges(A):
        lines.append(f"  {i} -> {j};")
    lines.append("}")
    return "\n".join(lines) + "\n"
