"""Small exact linear algebra over the rationals.

Matrices are lists of rows of ``Fraction``; polynomials are coefficient lists,
lowest degree first.  Sizes in this package are tiny (index maps of rank < 20),
so plain Gaussian elimination is all that is needed.
"""
from __future__ import annotations

from fractions import Fraction


def mat(rows) -> list:
    return [[Fraction(x) for x in r] for r in rows]


def zeros(n, m=None) -> list:
    return [[Fraction(0)] * (n if m is None else m) for _ in range(n)]


def identity(n) -> list:
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def shape(A):
    return (len(A), len(A[0]) if A else 0)


def transpose(A) -> list:
    return [list(c) for c in zip(*A)] if A else []


def matmul(A, B) -> list:
    if not A or not B:
        return [[Fraction(0)] * (len(B[0]) if B else 0) for _ in A]
    Bt = list(zip(*B))
    return [[sum((a * b for a, b in zip(r, c) if a and b), Fraction(0)) for c in Bt] for r in A]


def matvec(A, v) -> list:
    return [sum((a * b for a, b in zip(r, v) if a and b), Fraction(0)) for r in A]


def add(A, B) -> list:
    return [[a + b for a, b in zip(r, s)] for r, s in zip(A, B)]


def sub(A, B) -> list:
    return [[a - b for a, b in zip(r, s)] for r, s in zip(A, B)]


def scale(c, A) -> list:
    return [[c * a for a in r] for r in A]


def mat_pow(A, k) -> list:
    n = len(A)
    out = identity(n)
    base = A
    while k:
        if k & 1:
            out = matmul(out, base)
        base = matmul(base, base)
        k >>= 1
    return out


def trace(A) -> Fraction:
    return sum((A[i][i] for i in range(len(A))), Fraction(0))


def is_zero(A) -> bool:
    return all(not x for r in A for x in r)


def rref(A):
    """Reduced row echelon form and pivot columns."""
    M = [list(r) for r in A]
    n, m = shape(M)
    piv = []
    r = 0
    for c in range(m):
        p = next((i for i in range(r, n) if M[i][c]), None)
        if p is None:
            continue
        M[r], M[p] = M[p], M[r]
        inv = 1 / M[r][c]
        M[r] = [x * inv for x in M[r]]
        for i in range(n):
            if i != r and M[i][c]:
                f = M[i][c]
                M[i] = [x - f * y for x, y in zip(M[i], M[r])]
        piv.append(c)
        r += 1
        if r == n:
            break
    return M, piv


def rank(A) -> int:
    return len(rref(A)[1]) if A and A[0] else 0


def nullspace(A, ncols=None) -> list:
    """Basis (list of vectors) of ``{x : A x = 0}``."""
    m = ncols if ncols is not None else shape(A)[1]
    if not A:
        return [[Fraction(int(i == j)) for i in range(m)] for j in range(m)]
    R, piv = rref(A)
    free = [c for c in range(m) if c not in piv]
    out = []
    for f in free:
        v = [Fraction(0)] * m
        v[f] = Fraction(1)
        for r, c in enumerate(piv):
            v[c] = -R[r][f]
        out.append(v)
    return out


def inverse(A) -> list:
    n = len(A)
    aug = [list(r) + identity(n)[i] for i, r in enumerate(A)]
    R, piv = rref(aug)
    if piv[:n] != list(range(n)):
        raise ZeroDivisionError("matrix is singular")
    return [r[n:] for r in R]


def det(A) -> Fraction:
    M = [list(r) for r in A]
    n = len(M)
    d = Fraction(1)
    for c in range(n):
        p = next((i for i in range(c, n) if M[i][c]), None)
        if p is None:
            return Fraction(0)
        if p != c:
            M[c], M[p] = M[p], M[c]
            d = -d
        d *= M[c][c]
        for i in range(c + 1, n):
            if M[i][c]:
                f = M[i][c] / M[c][c]
                M[i] = [x - f * y for x, y in zip(M[i], M[c])]
    return d


def charpoly(A) -> list:
    """Coefficients of ``det(x I - A)``, lowest degree first (Faddeev-LeVerrier)."""
    n = len(A)
    coeffs = [Fraction(0)] * n + [Fraction(1)]
    M = zeros(n)
    for k in range(1, n + 1):
        M = add(matmul(A, M), scale(coeffs[n - k + 1], identity(n)))
        coeffs[n - k] = -trace(matmul(A, M)) / k
    return coeffs


# polynomials ---------------------------------------------------------------------

def ptrim(p) -> list:
    p = list(p)
    while p and not p[-1]:
        p.pop()
    return p


def pmonic(p) -> list:
    p = ptrim(p)
    return [c / p[-1] for c in p] if p else p


def pdivmod(a, b):
    a, b = ptrim(a), ptrim(b)
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    q = [Fraction(0)] * max(len(a) - len(b) + 1, 1)
    r = list(a)
    while len(r) >= len(b) and r:
        f = r[-1] / b[-1]
        s = len(r) - len(b)
        q[s] = f
        for i, c in enumerate(b):
            r[s + i] -= f * c
        r = ptrim(r)
    return ptrim(q), r


def pmul(a, b) -> list:
    if not a or not b:
        return []
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return ptrim(out)


def padd(a, b) -> list:
    n = max(len(a), len(b))
    return ptrim([(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)])


def psub(a, b) -> list:
    n = max(len(a), len(b))
    return ptrim([(a[i] if i < len(a) else 0) - (b[i] if i < len(b) else 0) for i in range(n)])


def invariant_factors(A) -> list:
    """Non-trivial invariant factors of ``A`` (monic, each divides the next).

    Computed by Smith reduction of ``x I - A`` over ``Q[x]``.
    """
    n = len(A)
    if n == 0:
        return []
    M = [[ptrim([-A[i][j], Fraction(int(i == j))]) for j in range(n)] for i in range(n)]
    diag = []
    for t in range(n):
        while True:
            # pivot: nonzero entry of least degree in the trailing block
            best = None
            for i in range(t, n):
                for j in range(t, n):
                    if M[i][j] and (best is None or len(M[i][j]) < len(M[best[0]][best[1]])):
                        best = (i, j)
            if best is None:
                diag.extend([[]] * (n - t))
                break
            i, j = best
            M[t], M[i] = M[i], M[t]
            for r in M:
                r[t], r[j] = r[j], r[t]
            p = M[t][t]
            done = True
            for i in range(t + 1, n):
                if M[i][t]:
                    q, _ = pdivmod(M[i][t], p)
                    M[i] = [psub(x, pmul(q, y)) for x, y in zip(M[i], M[t])]
                    if M[i][t]:
                        done = False
            for j in range(t + 1, n):
                if M[t][j]:
                    q, _ = pdivmod(M[t][j], p)
                    for r in M:
                        r[j] = psub(r[j], pmul(q, r[t]))
                    if M[t][j]:
                        done = False
            if not done:
                continue
            # the pivot must divide the rest of the block
            bad = next(((i, j) for i in range(t + 1, n) for j in range(t + 1, n)
                        if M[i][j] and pdivmod(M[i][j], p)[1]), None)
            if bad is not None:
                M[t] = [padd(x, y) for x, y in zip(M[t], M[bad[0]])]
                continue
            diag.append(pmonic(p))
            break
        if len(diag) == n:
            break
    return [d for d in diag if len(d) > 1]


def frac_str(x: Fraction) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def parse_frac(s) -> Fraction:
    return Fraction(s)
