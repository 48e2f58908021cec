"""Exact linear algebra over Gaussian rationals, subspaces and filtrations.

Vectors are tuples of scalars, matrices are lists of rows.  A subspace is
stored through the reduced row echelon form of a spanning set, which is the
transpose of the reduced column echelon form of its basis matrix; two
subspaces are equal exactly when these canonical forms agree.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

from .report import Report
from .scalars import Gaussian, conj

Vector = tuple
Matrix = list

ZERO = Fraction(0)
ONE = Fraction(1)


# ----------------------------------------------------------------------
# matrices
# ----------------------------------------------------------------------

def zeros(m: int, n: int | None = None) -> Matrix:
    n = m if n is None else n
    return [[ZERO] * n for _ in range(m)]


def identity(n: int) -> Matrix:
    M = zeros(n)
    for i in range(n):
        M[i][i] = ONE
    return M


def transpose(M: Matrix) -> Matrix:
    return [list(r) for r in zip(*M)] if M else []


def matmul(A: Matrix, B: Matrix) -> Matrix:
    if not A:
        return []
    Bt = transpose(B)
    if not Bt:
        return [[] for _ in A]
    out = []
    for row in A:
        nz = [(k, a) for k, a in enumerate(row) if a]
        out.append([sum((a * col[k] for k, a in nz), ZERO) for col in Bt])
    return out


def matvec(A: Matrix, v: Sequence) -> Vector:
    return tuple(sum((a * x for a, x in zip(row, v) if a and x), ZERO) for row in A)


def mat_add(A: Matrix, B: Matrix) -> Matrix:
    return [[a + b for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def mat_sub(A: Matrix, B: Matrix) -> Matrix:
    return [[a - b for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def mat_scale(c, A: Matrix) -> Matrix:
    return [[c * a for a in r] for r in A]


def mat_conj(A: Matrix) -> Matrix:
    return [[conj(a) for a in r] for r in A]


def is_zero_matrix(A: Matrix) -> bool:
    return all(not a for r in A for a in r)


def commutator(A: Matrix, B: Matrix) -> Matrix:
    return mat_sub(matmul(A, B), matmul(B, A))


def mat_power(A: Matrix, e: int) -> Matrix:
    out = identity(len(A))
    for _ in range(e):
        out = matmul(out, A)
    return out


def as_matrix(rows: Iterable[Iterable]) -> Matrix:
    return [[x if isinstance(x, (Fraction, Gaussian)) else Fraction(x) for x in r] for r in rows]


def rref(rows: Sequence[Sequence]) -> tuple[list[list], list[int]]:
    """Reduced row echelon form with pivots normalized to 1."""
    A = [list(r) for r in rows]
    if not A:
        return [], []
    m, n = len(A), len(A[0])
    pivots: list[int] = []
    r = 0
    for c in range(n):
        if r == m:
            break
        p = next((i for i in range(r, m) if A[i][c]), None)
        if p is None:
            continue
        A[r], A[p] = A[p], A[r]
        piv = A[r][c]
        if piv != ONE:
            inv = ONE / piv
            A[r] = [x * inv if x else x for x in A[r]]
        row_r = A[r]
        for i in range(m):
            if i != r and A[i][c]:
                f = A[i][c]
                A[i] = [x - f * y if y else x for x, y in zip(A[i], row_r)]
        pivots.append(c)
        r += 1
    return A[:r], pivots


def rank(M: Matrix) -> int:
    return len(rref(M)[1]) if M else 0


def nullspace(M: Matrix, ncols: int | None = None) -> list[Vector]:
    """Basis of {x : M x = 0}."""
    n = ncols if ncols is not None else (len(M[0]) if M else 0)
    if not M:
        return [tuple(ONE if i == j else ZERO for i in range(n)) for j in range(n)]
    R, piv = rref(M)
    free = [c for c in range(n) if c not in piv]
    out = []
    for f in free:
        x = [ZERO] * n
        x[f] = ONE
        for row, pc in zip(R, piv):
            x[pc] = -row[f]
        out.append(tuple(x))
    return out


def solve(M: Matrix, b: Sequence) -> Vector | None:
    """One solution of M x = b, or None."""
    m = len(M)
    n = len(M[0]) if M else 0
    aug = [list(M[i]) + [b[i]] for i in range(m)]
    R, piv = rref(aug)
    if n in piv:
        return None
    x = [ZERO] * n
    for row, pc in zip(R, piv):
        x[pc] = row[n]
    return tuple(x)


def inverse(M: Matrix) -> Matrix:
    n = len(M)
    aug = [list(M[i]) + [ONE if i == j else ZERO for j in range(n)] for i in range(n)]
    R, piv = rref(aug)
    if piv[:n] != list(range(n)) or len(piv) < n:
        raise ValueError("matrix is singular")
    return [row[n:] for row in R]


def det(M: Matrix):
    A = [list(r) for r in M]
    n = len(A)
    d = ONE
    for c in range(n):
        p = next((i for i in range(c, n) if A[i][c]), None)
        if p is None:
            return ZERO
        if p != c:
            A[c], A[p] = A[p], A[c]
            d = -d
        piv = A[c][c]
        d = d * piv
        for i in range(c + 1, n):
            if A[i][c]:
                f = A[i][c] / piv
                A[i] = [x - f * y for x, y in zip(A[i], A[c])]
    return d


def is_nilpotent(N: Matrix) -> bool:
    n = len(N)
    return is_zero_matrix(mat_power(N, n)) if n else True


# ----------------------------------------------------------------------
# subspaces
# ----------------------------------------------------------------------

class AmbientMismatch(ValueError):
    pass


class Subspace:
    """A subspace of K^n with a canonical reduced echelon basis."""

    __slots__ = ("n", "rows", "pivots", "_hash")

    def __init__(self, n: int, rows: tuple, pivots: tuple):
        self.n = n
        self.rows = rows
        self.pivots = pivots
        self._hash = None

    @classmethod
    def span(cls, n: int, vectors: Iterable[Sequence]) -> "Subspace":
        vs = [tuple(v) for v in vectors]
        for v in vs:
            if len(v) != n:
                raise AmbientMismatch(f"vector of length {len(v)} in K^{n}")
        R, piv = rref(vs)
        return cls(n, tuple(tuple(r) for r in R), tuple(piv))

    @classmethod
    def zero(cls, n: int) -> "Subspace":
        return cls(n, (), ())

    @classmethod
    def full(cls, n: int) -> "Subspace":
        return cls.span(n, identity(n))

    @classmethod
    def coordinate(cls, n: int, idx: Iterable[int]) -> "Subspace":
        return cls.span(n, [tuple(ONE if i == j else ZERO for i in range(n)) for j in sorted(idx)])

    @property
    def dim(self) -> int:
        return len(self.rows)

    @property
    def basis(self) -> list[Vector]:
        return list(self.rows)

    def _same(self, other: "Subspace"):
        if self.n != other.n:
            raise AmbientMismatch(f"K^{self.n} vs K^{other.n}")

    def __eq__(self, other):
        return isinstance(other, Subspace) and self.n == other.n and self.rows == other.rows

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.n, self.rows))
        return self._hash

    def __repr__(self):
        return f"Subspace(dim={self.dim} in K^{self.n})"

    def __add__(self, other: "Subspace") -> "Subspace":
        self._same(other)
        if not other.rows:
            return self
        if not self.rows:
            return other
        return Subspace.span(self.n, self.rows + other.rows)

    def __and__(self, other: "Subspace") -> "Subspace":
        self._same(other)
        if not self.rows or not other.rows:
            return Subspace.zero(self.n)
        if self.dim == self.n:
            return other
        if other.dim == self.n:
            return self
        # v = sum a_i s_i = sum b_j o_j
        cols = list(self.rows) + [tuple(-x for x in o) for o in other.rows]
        M = transpose([list(c) for c in cols])
        ker = nullspace(M, len(cols))
        da = self.dim
        vecs = []
        for k in ker:
            v = [ZERO] * self.n
            for a, s in zip(k[:da], self.rows):
                if a:
                    v = [x + a * y for x, y in zip(v, s)]
            vecs.append(v)
        return Subspace.span(self.n, vecs)

    def __le__(self, other: "Subspace") -> bool:
        self._same(other)
        return all(other.contains(v) for v in self.rows)

    def __ge__(self, other: "Subspace") -> bool:
        return other <= self

    def contains(self, v: Sequence) -> bool:
        """Membership test by reduction against the echelon rows."""
        w = list(v)
        for row, pc in zip(self.rows, self.pivots):
            if w[pc]:
                f = w[pc]
                w = [x - f * y if y else x for x, y in zip(w, row)]
        return all(not x for x in w)

    def coords(self, v: Sequence) -> Vector:
        """Coordinates of v in the canonical basis; raises if v is outside."""
        c = tuple(v[pc] for pc in self.pivots)
        w = list(v)
        for a, row in zip(c, self.rows):
            if a:
                w = [x - a * y for x, y in zip(w, row)]
        if any(w):
            raise ValueError("vector not in subspace")
        return c

    def conj(self) -> "Subspace":
        return Subspace.span(self.n, [[conj(x) for x in r] for r in self.rows])

    def image(self, M: Matrix) -> "Subspace":
        return Subspace.span(len(M), [matvec(M, v) for v in self.rows])

    def preimage(self, M: Matrix) -> "Subspace":
        """{x : M x in self}."""
        m = len(M)
        n = len(M[0]) if M else 0
        # annihilator rows y with y.s = 0 for s in self
        ann = nullspace([list(r) for r in self.rows], m) if self.rows else [
            tuple(ONE if i == j else ZERO for i in range(m)) for j in range(m)]
        if not ann:
            return Subspace.full(n)
        A = matmul([list(a) for a in ann], M)
        return Subspace.span(n, nullspace(A, n))

    def is_stable(self, M: Matrix) -> bool:
        return all(self.contains(matvec(M, v)) for v in self.rows)

    def complement_in(self, big: "Subspace") -> list[Vector]:
        """Vectors of ``big`` completing a basis of self to a basis of big."""
        self._same(big)
        out = []
        cur = self
        for v in big.rows:
            if not cur.contains(v):
                out.append(v)
                cur = cur + Subspace.span(self.n, [v])
        return out

    def is_real(self) -> bool:
        return self.conj() == self


def direct_sum_ok(n: int, pieces: Iterable[Subspace]) -> bool:
    ps = list(pieces)
    total = sum(p.dim for p in ps)
    vecs = [v for p in ps for v in p.rows]
    return total == rank([list(v) for v in vecs]) if vecs else True


def sum_all(n: int, pieces: Iterable[Subspace]) -> Subspace:
    vecs = [v for p in pieces for v in p.rows]
    return Subspace.span(n, vecs)


# ----------------------------------------------------------------------
# filtrations
# ----------------------------------------------------------------------

class _Filtration:
    decreasing = True

    __slots__ = ("n", "lo", "pieces")

    def __init__(self, n: int, lo: int, pieces: Sequence[Subspace]):
        pcs = list(pieces)
        for s in pcs:
            if s.n != n:
                raise AmbientMismatch("piece outside the ambient space")
        below, above = self._clamps(n)
        while pcs and pcs[0] == below:
            pcs.pop(0)
            lo += 1
        while pcs and pcs[-1] == above:
            pcs.pop()
        if n == 0:
            lo, pcs = 0, []
        self.n = n
        self.lo = lo
        self.pieces = tuple(pcs)

    def _clamps(self, n):
        raise NotImplementedError

    @property
    def hi(self) -> int:
        """First index at which the upper clamp applies."""
        return self.lo + len(self.pieces)

    def __getitem__(self, i: int) -> Subspace:
        below, above = self._clamps(self.n)
        if i < self.lo:
            return below
        if i >= self.hi:
            return above
        return self.pieces[i - self.lo]

    def __eq__(self, other):
        return (type(self) is type(other) and self.n == other.n and self.lo == other.lo
                and self.pieces == other.pieces)

    def __hash__(self):
        return hash((type(self).__name__, self.n, self.lo, self.pieces))

    def indices(self, pad: int = 1) -> range:
        return range(self.lo - pad, self.hi + pad)

    def conj(self):
        return type(self)(self.n, self.lo, [p.conj() for p in self.pieces])

    def is_real(self) -> bool:
        return all(p.is_real() for p in self.pieces)

    def jumps(self) -> dict[int, int]:
        """Index -> dimension for every index where the dimension changes."""
        out = {}
        for i in self.indices(1):
            out[i] = self[i].dim
        return out

    def as_map(self) -> dict[int, Subspace]:
        return {i: self[i] for i in self.indices(1)}


class DecFiltration(_Filtration):
    """F^p, decreasing; F^p = V below ``lo`` and 0 from ``hi`` on."""

    decreasing = True

    def _clamps(self, n):
        return Subspace.full(n), Subspace.zero(n)

    @classmethod
    def from_map(cls, n: int, pieces: dict[int, Subspace]) -> "DecFiltration":
        if not pieces:
            return cls(n, 0, [])
        lo, hi = min(pieces), max(pieces)
        seq = []
        for p in range(lo, hi + 1):
            if p not in pieces:
                raise ValueError(f"missing filtration index {p}")
            seq.append(pieces[p])
        f = cls(n, lo, seq)
        f.check()
        return f

    @classmethod
    def from_grading(cls, n: int, graded: dict[int, Subspace]) -> "DecFiltration":
        """F^p = sum of graded pieces with index >= p."""
        if not graded:
            return cls(n, 0, [])
        lo, hi = min(graded), max(graded)
        seq = []
        for p in range(lo, hi + 1):
            seq.append(sum_all(n, [s for a, s in graded.items() if a >= p]))
        return cls(n, lo, seq)

    def check(self):
        for p in range(self.lo, self.hi):
            if not (self[p + 1] <= self[p]):
                raise ValueError(f"not decreasing at {p}")

    def __repr__(self):
        return f"DecFiltration(lo={self.lo}, dims={[s.dim for s in self.pieces]})"


class IncFiltration(_Filtration):
    """Psi_q, increasing; 0 below ``lo`` and V from ``hi`` on."""

    decreasing = False

    def _clamps(self, n):
        return Subspace.zero(n), Subspace.full(n)

    @classmethod
    def from_map(cls, n: int, pieces: dict[int, Subspace]) -> "IncFiltration":
        if not pieces:
            return cls(n, 0, [])
        lo, hi = min(pieces), max(pieces)
        seq = []
        for p in range(lo, hi + 1):
            if p not in pieces:
                raise ValueError(f"missing filtration index {p}")
            seq.append(pieces[p])
        f = cls(n, lo, seq)
        f.check()
        return f

    @classmethod
    def from_grading(cls, n: int, graded: dict[int, Subspace]) -> "IncFiltration":
        """Psi_q = sum of graded pieces with index <= q."""
        if not graded:
            return cls(n, 0, [])
        lo, hi = min(graded), max(graded)
        seq = []
        for q in range(lo, hi + 1):
            seq.append(sum_all(n, [s for a, s in graded.items() if a <= q]))
        return cls(n, lo, seq)

    @classmethod
    def single_jump(cls, n: int, at: int) -> "IncFiltration":
        """Psi_q = 0 for q < at and V for q >= at."""
        return cls(n, at, [])

    def check(self):
        for q in range(self.lo, self.hi):
            if not (self[q] <= self[q + 1]):
                raise ValueError(f"not increasing at {q}")

    def shift(self, s: int) -> "IncFiltration":
        """Re-index so that result_j = self_{j-s}."""
        return IncFiltration(self.n, self.lo + s, self.pieces)

    def __repr__(self):
        return f"IncFiltration(lo={self.lo}, dims={[s.dim for s in self.pieces]})"


# ----------------------------------------------------------------------
# filtration calculus
# ----------------------------------------------------------------------

def is_opposite(F: DecFiltration, Psi: IncFiltration) -> Report:
    """V = F^p (+) Psi_{p-1} for every p."""
    if F.n != Psi.n:
        raise AmbientMismatch("filtrations on different spaces")
    rep = Report("opposite")
    lo = min(F.lo, Psi.lo + 1) - 1
    hi = max(F.hi, Psi.hi + 1) + 1
    bad = []
    for p in range(lo, hi + 1):
        a, b = F[p], Psi[p - 1]
        if a.dim + b.dim != F.n or (a & b).dim != 0:
            bad.append(p)
    rep.add("complement", not bad, failing=bad)
    return rep


def is_opposite_by_rank(F: DecFiltration, Psi: IncFiltration) -> bool:
    """The same test phrased as invertibility of [basis F^p | basis Psi_{p-1}]."""
    lo = min(F.lo, Psi.lo + 1) - 1
    hi = max(F.hi, Psi.hi + 1) + 1
    for p in range(lo, hi + 1):
        cols = list(F[p].rows) + list(Psi[p - 1].rows)
        if len(cols) != F.n:
            return False
        if F.n and det(transpose([list(c) for c in cols])) == 0:
            return False
    return True


def k_opposed_partner(G: DecFiltration, k: int) -> IncFiltration:
    """Psi_q := G^{k-q}."""
    # Psi_q = G^{k-q}: q < k - G.hi + 1 gives k-q >= G.hi -> 0
    lo = k - G.hi + 1
    pieces = [G[k - q] for q in range(lo, k - G.lo + 1)]
    return IncFiltration(G.n, lo, pieces)


def is_k_opposed(F: DecFiltration, G: DecFiltration, k: int) -> Report:
    rep = is_opposite(F, k_opposed_partner(G, k))
    rep.title = f"{k}-opposed"
    return rep


def convolve(A: IncFiltration, B: IncFiltration) -> IncFiltration:
    """(A*B)_q = sum_k A_{q-k} cap B_k."""
    if A.n != B.n:
        raise AmbientMismatch("filtrations on different spaces")
    n = A.n
    ks = range(B.lo, B.hi + 1)
    qlo = A.lo + B.lo - 1
    qhi = A.hi + B.hi + 1
    pieces = []
    for q in range(qlo, qhi + 1):
        pieces.append(sum_all(n, [A[q - k] & B[k] for k in ks]))
    return IncFiltration(n, qlo, pieces)


def dual(F):
    """F^vee_r = F^{-r}; also maps an increasing filtration back."""
    if isinstance(F, DecFiltration):
        # result_r = F^{-r}; F^{-r} = 0 once -r >= F.hi
        lo = -F.hi + 1
        pieces = [F[-r] for r in range(lo, -F.lo + 1)]
        return IncFiltration(F.n, lo, pieces)
    lo = -F.hi + 1
    pieces = [F[-p] for p in range(lo, -F.lo + 1)]
    return DecFiltration(F.n, lo, pieces)


class Quotient:
    """The quotient big/small with a chosen basis of lifts."""

    def __init__(self, big: Subspace, small: Subspace):
        if not small <= big:
            raise ValueError("not a subspace")
        self.big = big
        self.small = small
        self.lifts = small.complement_in(big)
        self.dim = len(self.lifts)
        # solve v = sum c_i lift_i + s with s in small
        self._basis = list(self.lifts) + list(small.rows)
        self._M = transpose([list(v) for v in self._basis]) if self._basis else []

    def coords(self, v: Sequence) -> Vector:
        if not self._basis:
            return ()
        x = solve(self._M, list(v))
        if x is None:
            raise ValueError("vector outside the numerator")
        return tuple(x[: self.dim])

    def project(self, S: Subspace) -> Subspace:
        """Image of (S cap big) in the quotient coordinates."""
        T = S & self.big
        return Subspace.span(self.dim, [self.coords(v) for v in T.rows])

    def induced_map(self, M: Matrix) -> Matrix:
        """Matrix of an endomorphism preserving big and small on the quotient."""
        cols = [self.coords(matvec(M, v)) for v in self.lifts]
        return transpose([list(c) for c in cols]) if cols else []


def graded_filtration(F: DecFiltration, W: IncFiltration, k: int) -> tuple[DecFiltration, Quotient]:
    """Induced filtration (F^p cap W_k + W_{k-1}) / W_{k-1} on Gr^W_k."""
    Q = Quotient(W[k], W[k - 1])
    pieces = [Q.project(F[p]) for p in range(F.lo, F.hi)]
    return DecFiltration(Q.dim, F.lo, pieces), Q
