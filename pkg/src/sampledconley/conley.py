"""Leray reduction, generalized Lefschetz numbers and Conley index canonical forms."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from . import qmat
from .homology import GradedEndomorphism


def _reduce_matrix(A) -> list:
    """Action of ``A`` on ``V / ker A^n`` in a basis extending the generalized kernel."""
    n = len(A)
    if n == 0:
        return []
    K = qmat.nullspace(qmat.mat_pow(A, n), n)
    if len(K) == n:
        return []
    # complete K to a basis with unit vectors, chosen greedily via the pivots
    R, piv = qmat.rref(K) if K else ([], [])
    comp = [[Fraction(int(i == j)) for i in range(n)] for j in range(n) if j not in piv]
    basis = K + comp
    B = qmat.transpose(basis)  # columns are basis vectors
    Binv = qmat.inverse(B)
    k = len(K)
    AC = qmat.matmul(A, qmat.transpose(comp))
    coords = qmat.matmul(Binv, AC)
    return [row for row in coords[k:]]


@dataclass
class LerayReduced:
    """Per-degree automorphisms induced on the quotient by the generalized kernel."""
    endo: GradedEndomorphism

    def dims(self) -> dict:
        return {k: len(self.endo[k]) for k in self.endo.degrees()}

    def is_trivial(self) -> bool:
        return not self.endo.degrees()

    def __getitem__(self, k):
        return self.endo[k]


def leray_reduce(phi: GradedEndomorphism) -> LerayReduced:
    out = {}
    for k in phi.degrees():
        M = _reduce_matrix(phi[k])
        if M:
            out[k] = M
    return LerayReduced(GradedEndomorphism(out))


def lefschetz(phi) -> Fraction:
    """Generalized Lefschetz number, evaluated on the Leray reduction.

    Traces of nilpotent parts vanish, so this equals the plain alternating
    trace sum; computing it on the reduction keeps the definition honest.
    """
    red = phi if isinstance(phi, LerayReduced) else leray_reduce(phi)
    return sum(((-1) ** k * qmat.trace(red[k]) for k in red.endo.degrees()), Fraction(0))


def lefschetz_trace(phi: GradedEndomorphism) -> Fraction:
    """Alternating trace sum of the unreduced map."""
    return sum(((-1) ** k * qmat.trace(phi[k]) for k in phi.degrees()), Fraction(0))


def companion(p) -> list:
    """Companion matrix of a monic polynomial (coefficients lowest first)."""
    n = len(p) - 1
    C = qmat.zeros(n)
    for i in range(1, n):
        C[i][i - 1] = Fraction(1)
    for i in range(n):
        C[i][n - 1] = -Fraction(p[i])
    return C


def rational_canonical_form(A) -> list:
    """Block diagonal of companion matrices of the invariant factors."""
    blocks = [companion(f) for f in qmat.invariant_factors(A)]
    n = sum(len(b) for b in blocks)
    M = qmat.zeros(n)
    o = 0
    for b in blocks:
        for i, r in enumerate(b):
            M[o + i][o:o + len(b)] = r
        o += len(b)
    return M


def _poly_str(p) -> list:
    return [qmat.frac_str(c) for c in p]


@dataclass
class ConleyIndex:
    """Leray-reduced index map with its per-degree invariant factors."""
    reduced: LerayReduced
    factors: dict

    @classmethod
    def of(cls, phi: GradedEndomorphism) -> "ConleyIndex":
        red = leray_reduce(phi)
        return cls(red, {k: qmat.invariant_factors(red[k]) for k in red.endo.degrees()})

    def is_trivial(self) -> bool:
        return self.reduced.is_trivial()

    def charpoly(self, k) -> list:
        out = [Fraction(1)]
        for f in self.factors.get(k, []):
            out = qmat.pmul(out, f)
        return out

    def canonical(self) -> dict:
        return {k: rational_canonical_form(self.reduced[k]) for k in self.factors}

    def to_json(self) -> dict:
        return {
            "dims": {str(k): v for k, v in sorted(self.reduced.dims().items())},
            "invariant_factors": {str(k): [_poly_str(f) for f in fs] for k, fs in sorted(self.factors.items())},
            "charpoly": {str(k): _poly_str(self.charpoly(k)) for k in sorted(self.factors)},
            "lefschetz": qmat.frac_str(lefschetz(self.reduced)),
        }

    def __eq__(self, other):
        if not isinstance(other, ConleyIndex):
            return NotImplemented
        return self.factors == other.factors


def conley_index(F, N, P1, P2, **kw) -> ConleyIndex:
    """Index map of the pair followed by Leray reduction."""
    from .homology import index_map
    I, _, _ = index_map(F, N, P1, P2, **kw)
    return ConleyIndex.of(I)


def conjugate_up_to_transpose(A, B) -> bool:
    """Whether ``A`` is similar to ``B`` or to ``B^T`` over the rationals.

    Similarity and transpose-similarity coincide (a matrix is always similar to
    its transpose), so this compares invariant factors.
    """
    return qmat.invariant_factors(qmat.mat(A)) == qmat.invariant_factors(qmat.mat(B))


def signed_permutation_conjugacy(A, B):
    """A signed permutation ``s`` with ``B[s(i)][s(j)] = sign_i sign_j A[i][j]``, or None.

    ``s`` is returned as a list of ``(j, sign)`` pairs, one per row of ``A``.
    Backtracking with entrywise pruning; fine for the sizes met here (n <= 10).
    """
    A, B = qmat.mat(A), qmat.mat(B)
    n = len(A)
    if len(B) != n:
        return None
    if sorted(abs(A[i][i]) for i in range(n)) != sorted(abs(B[i][i]) for i in range(n)):
        return None
    assign = [None] * n
    used = [False] * n

    def ok(i):
        j, s = assign[i]
        if B[j][j] != A[i][i]:
            return False
        for k in range(i):
            l, t = assign[k]
            if B[j][l] != s * t * A[i][k] or B[l][j] != s * t * A[k][i]:
                return False
        return True

    def rec(i):
        if i == n:
            return True
        for j in range(n):
            if used[j]:
                continue
            for s in (1, -1):
                assign[i] = (j, s)
                if ok(i):
                    used[j] = True
                    if rec(i + 1):
                        return True
                    used[j] = False
            assign[i] = None
        return False

    return list(assign) if rec(0) else None


def matches_up_to_signed_permutation(A, B, allow_transpose=True) -> bool:
    if signed_permutation_conjugacy(A, B) is not None:
        return True
    return allow_transpose and signed_permutation_conjugacy(A, qmat.transpose(qmat.mat(B))) is not None
