"""Hodge structures, the Deligne bigrading and weight filtrations."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .linfilt import (
    DecFiltration, IncFiltration, Matrix, Quotient, Subspace, convolve, det, dual, graded_filtration,
    identity, is_k_opposed, is_zero_matrix, mat_add, mat_power, mat_scale, matmul, matvec, nullspace, rank,
    solve, sum_all, transpose, commutator, is_nilpotent,
)
from .report import CheckError, Report
from .scalars import I as IMAG, conj, is_real

ZERO = Fraction(0)
ONE = Fraction(1)

# Sign attached to the Lefschetz-twisted form on the primitive part of
# weight w = k + j: (-1)^{w(w-1)/2}.  Pinned here so the tests use one convention.
POLARIZATION_SIGN_EXPONENT = "w*(w-1)/2"


def polarization_sign(w: int) -> int:
    return -1 if (w * (w - 1) // 2) % 2 else 1


# ----------------------------------------------------------------------
# data types
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class MHS:
    F: DecFiltration
    W: IncFiltration

    @property
    def n(self) -> int:
        return self.F.n

    def weights(self) -> range:
        return range(self.W.lo, self.W.hi + 1)

    def hodge_range(self) -> range:
        return range(self.F.lo - 1, self.F.hi)

    def validate(self) -> Report:
        rep = Report("mixed Hodge structure")
        rep.add("weight filtration real", self.W.is_real())
        bad = []
        for k in self.weights():
            Fk, Qk = graded_filtration(self.F, self.W, k)
            if Qk.dim == 0:
                continue
            if not is_k_opposed(Fk, Fk.conj(), k).ok:
                bad.append(k)
        rep.add("graded pieces pure", not bad, failing_weights=bad)
        return rep


@dataclass
class Bigrading:
    n: int
    pieces: dict = field(default_factory=dict)  # (p, q) -> Subspace, nonzero only

    def __getitem__(self, pq) -> Subspace:
        return self.pieces.get(tuple(pq), Subspace.zero(self.n))

    def support(self) -> list[tuple[int, int]]:
        return sorted(self.pieces)

    def span(self, pred) -> Subspace:
        return sum_all(self.n, [s for pq, s in self.pieces.items() if pred(*pq)])

    def dims(self) -> dict[tuple[int, int], int]:
        return {pq: s.dim for pq, s in sorted(self.pieces.items())}

    def hodge_filtration(self) -> DecFiltration:
        ps = [p for p, _ in self.pieces] or [0]
        return DecFiltration.from_map(self.n, {p: self.span(lambda a, b, p=p: a >= p)
                                               for p in range(min(ps), max(ps) + 2)})

    def weight_filtration(self) -> IncFiltration:
        ks = [p + q for p, q in self.pieces] or [0]
        return IncFiltration.from_map(self.n, {k: self.span(lambda a, b, k=k: a + b <= k)
                                               for k in range(min(ks) - 1, max(ks) + 1)})

    def mhs(self) -> MHS:
        return MHS(self.hodge_filtration(), self.weight_filtration())

    def __eq__(self, other):
        return isinstance(other, Bigrading) and self.n == other.n and self.pieces == other.pieces

    def change_basis(self, g: Matrix) -> "Bigrading":
        return Bigrading(self.n, {pq: s.image(g) for pq, s in self.pieces.items()})

    def projector(self, pq) -> Matrix:
        """Projection onto I^{p,q} along the other pieces."""
        return projectors(self)[tuple(pq)]


def projectors(I: Bigrading) -> dict:
    keys = I.support()
    cols = []
    owner = []
    for pq in keys:
        for v in I.pieces[pq].rows:
            cols.append(v)
            owner.append(pq)
    P = transpose([list(v) for v in cols])
    from .linfilt import inverse
    Pinv = inverse(P)
    out = {}
    for pq in keys:
        D = [[ONE if (i == j and owner[i] == pq) else ZERO for j in range(len(cols))] for i in range(len(cols))]
        out[pq] = matmul(matmul(P, D), Pinv)
    return out


# ----------------------------------------------------------------------
# pure structures and polarizations
# ----------------------------------------------------------------------

def check_pure(F: DecFiltration, k: int) -> Report:
    rep = is_k_opposed(F, F.conj(), k)
    rep.title = f"pure of weight {k}"
    return rep


def _bilinear(Q: Matrix, u, v):
    return sum((a * Q[i][j] * b for i, a in enumerate(u) if a for j, b in enumerate(v) if b), ZERO)


def _positive_definite_hermitian(G: Matrix) -> bool:
    """Leading principal minors of a Hermitian matrix all real and positive."""
    n = len(G)
    for i in range(n):
        for j in range(n):
            if G[i][j] != conj(G[j][i]):
                return False
    for m in range(1, n + 1):
        d = det([row[:m] for row in G[:m]])
        if not is_real(d) or d <= 0:
            return False
    return True


def _ipow(e: int):
    return [ONE, IMAG, -ONE, -IMAG][e % 4]


def check_polarization(F: DecFiltration, k: int, Q: Matrix) -> Report:
    n = F.n
    if n and det(Q) == 0:
        raise CheckError("polarization form is degenerate")
    rep = Report(f"polarization of weight {k}")
    sym = (-1) ** k
    rep.add("form (-1)^k symmetric",
            all(Q[i][j] == sym * Q[j][i] for i in range(n) for j in range(n)))
    bad_orth = []
    for p in range(F.lo - 1, F.hi + 1):
        A, B = F[p], F[k - p + 1]
        if any(_bilinear(Q, u, v) for u in A.rows for v in B.rows):
            bad_orth.append(p)
    rep.add("orthogonality", not bad_orth, failing=bad_orth)
    Fb = F.conj()
    bad_pos = []
    for p in range(F.lo - 1, F.hi):
        q = k - p
        H = F[p] & Fb[q]
        if H.dim == 0:
            continue
        c = _ipow(p - q)
        G = [[c * _bilinear(Q, u, [conj(x) for x in v]) for v in H.rows] for u in H.rows]
        if not _positive_definite_hermitian(G):
            bad_pos.append(p)
    rep.add("positivity", not bad_pos, failing=bad_pos)
    return rep


# ----------------------------------------------------------------------
# the bigrading
# ----------------------------------------------------------------------

def barphi(M: MHS) -> IncFiltration:
    """The convolution of the dual of the conjugate filtration with W."""
    return convolve(dual(M.F.conj()), M.W)


def barphi_direct(M: MHS) -> IncFiltration:
    """Sum over k of conj(F)^{k-q} cap W_k, term by term."""
    Fb = M.F.conj()
    ks = range(M.W.lo, M.W.hi + 1)
    qlo = M.W.lo - Fb.hi
    qhi = M.W.hi - Fb.lo + 2
    pieces = [sum_all(M.n, [Fb[k - q] & M.W[k] for k in ks]) for q in range(qlo, qhi + 1)]
    return IncFiltration(M.n, qlo, pieces)


def deligne_bigrading(M: MHS) -> Bigrading:
    n = M.n
    F, W = M.F, M.W
    Fb = F.conj()
    Phi = barphi(M)
    prange = range(F.lo - 1, F.hi)
    krange = range(W.lo, W.hi + 1)
    pieces = {}
    for p in prange:
        U = F[p] & Phi[p]
        if U.dim == 0:
            continue
        for k in krange:
            q = k - p
            A = U & W[k]
            if A.dim == 0:
                continue
            R = sum_all(n, [Fb[q] & W[k]] + [Fb[q - j + 1] & W[k - j] for j in range(2, k - W.lo + 2)])
            piece = A & R
            if piece.dim:
                pieces[(p, q)] = piece
    I = Bigrading(n, pieces)
    total = sum(s.dim for s in pieces.values())
    if total != n or sum_all(n, pieces.values()).dim != n:
        # locate the first weight where the pieces fail to fill Gr^W_k
        for k in krange:
            below = [s for (p, q), s in pieces.items() if p + q <= k]
            if sum(s.dim for s in below) != W[k].dim or sum_all(n, below) != W[k]:
                raise CheckError("input is not a mixed Hodge structure", weight=k)
        raise CheckError("bigrading is not a direct sum", weight=W.hi)
    return I


def verify_bigrading(I: Bigrading, M: MHS) -> Report:
    n = M.n
    rep = Report("bigrading")
    total = sum(s.dim for s in I.pieces.values())
    rep.add("direct sum", total == n and sum_all(n, I.pieces.values()).dim == n)
    bad = [p for p in range(M.F.lo - 1, M.F.hi + 1) if I.span(lambda a, b, p=p: a >= p) != M.F[p]]
    rep.add("hodge filtration", not bad, failing=bad)
    bad = [k for k in range(M.W.lo - 1, M.W.hi + 1) if I.span(lambda a, b, k=k: a + b <= k) != M.W[k]]
    rep.add("weight filtration", not bad, failing=bad)
    bad = []
    for (p, q), s in I.pieces.items():
        L = I.span(lambda a, b, p=p, q=q: a < q and b < p)
        lhs = s.conj() + L
        rhs = I[(q, p)] + L
        if lhs != rhs:
            bad.append((p, q))
    rep.add("conjugation congruence", not bad, failing=bad)
    Phi = barphi(M)
    ps = [p for p, _ in I.pieces] or [0]
    bad = [p for p in range(min(ps) - 1, max(ps) + 2) if I.span(lambda a, b, p=p: a <= p) != Phi[p]]
    rep.add("lower-index sums", not bad, failing=bad)
    return rep


def is_hodge_tate(I: Bigrading) -> bool:
    return all(p == q for p, q in I.pieces)


def is_split_real(I: Bigrading) -> bool:
    return is_hodge_tate(I) and all(s.conj() == I[(q, p)] for (p, q), s in I.pieces.items())


def check_morphism_type(N: Matrix, I: Bigrading, ab: tuple[int, int]) -> bool:
    a, b = ab
    for (p, q), s in I.pieces.items():
        tgt = I[(p + a, q + b)]
        if not all(tgt.contains(matvec(N, v)) for v in s.rows):
            return False
    return True


# ----------------------------------------------------------------------
# weight filtrations of nilpotent maps
# ----------------------------------------------------------------------

def nilpotency_index(N: Matrix) -> int:
    """Smallest m with N^m = 0."""
    n = len(N)
    P = identity(n)
    for m in range(n + 1):
        if is_zero_matrix(P):
            return m
        P = matmul(P, N)
    raise CheckError("map is not nilpotent")


def _kernel(M: Matrix) -> Subspace:
    n = len(M)
    return Subspace.span(n, nullspace(M, n))


def weight_filtration(N: Matrix, center: int = 0) -> IncFiltration:
    """The filtration with N W_j in W_{j-2} and N^j : Gr_{c+j} = Gr_{c-j}."""
    n = len(N)
    if not is_nilpotent(N):
        raise CheckError("map is not nilpotent")
    if n == 0:
        return IncFiltration(0, 0, [])
    m = nilpotency_index(N) - 1  # N^{m+1} = 0
    if m <= 0:
        return IncFiltration.single_jump(n, center)
    powers = [identity(n)]
    for _ in range(2 * m + 3):
        powers.append(matmul(powers[-1], N))
    kers = [_kernel(P) for P in powers]

    def ker(e):
        return kers[e] if e < len(kers) else Subspace.full(n)

    pieces = {}
    for k in range(-m - 1, m + 1):
        parts = []
        for j in range(max(0, -k), m + 1):
            e = k + 2 * j + 1
            if e <= 0:
                continue
            parts.append(ker(e).image(powers[j]))
        pieces[k + center] = sum_all(n, parts)
    return IncFiltration.from_map(n, pieces)


def verify_weight_filtration(N: Matrix, W: IncFiltration, center: int = 0) -> Report:
    rep = Report("weight filtration")
    bad = [j for j in range(W.lo - 1, W.hi + 2) if not all(W[j - 2].contains(matvec(N, v)) for v in W[j].rows)]
    rep.add("lowers weight by two", not bad, failing=bad)
    bad = []
    span = max(abs(W.lo - center), abs(W.hi - center)) + 1
    for j in range(1, span + 1):
        top = Quotient(W[center + j], W[center + j - 1])
        bot = Quotient(W[center - j], W[center - j - 1])
        if top.dim != bot.dim:
            bad.append(j)
            continue
        if top.dim == 0:
            continue
        Nj = mat_power(N, j)
        imgs = [bot.coords(matvec(Nj, v)) for v in top.lifts]
        if rank([list(x) for x in imgs]) != top.dim:
            bad.append(j)
    rep.add("isomorphisms between graded pieces", not bad, failing=bad)
    return rep


def weight_filtration_cone(Ns: Sequence[Matrix], center: int = 0, samples: int = 20,
                           seed: int = 0) -> tuple[IncFiltration, Report]:
    n = len(Ns[0]) if Ns else 0
    for a in range(len(Ns)):
        for b in range(a + 1, len(Ns)):
            if not is_zero_matrix(commutator(Ns[a], Ns[b])):
                raise CheckError("nilpotent maps do not commute", pair=(a, b))
    total = [[ZERO] * n for _ in range(n)]
    for N in Ns:
        total = mat_add(total, N)
    W = weight_filtration(total, center)
    rep = Report("cone independence")
    rng = random.Random(seed)
    tuples = [[ONE] * len(Ns)]
    tuples += [[Fraction(rng.randint(1, 9), rng.randint(1, 9)) for _ in Ns] for _ in range(samples)]
    bad = []
    for cs in tuples:
        Nc = [[ZERO] * n for _ in range(n)]
        for c, N in zip(cs, Ns):
            Nc = mat_add(Nc, mat_scale(c, N))
        if not verify_weight_filtration(Nc, W, center).ok:
            bad.append([str(c) for c in cs])
    rep.add("W(sum N_j) satisfies the axioms for sampled cone elements", not bad,
            samples=len(tuples), failing=bad[:3])
    return W, rep


def _jordan_tops(Nbar: Matrix) -> list[tuple[list, int]]:
    """Chain tops u with chain length l (u, Nu, ..., N^{l-1}u a Jordan basis)."""
    d = len(Nbar)
    if d == 0:
        return []
    m = nilpotency_index(Nbar)
    powers = [identity(d)]
    for _ in range(m + 1):
        powers.append(matmul(powers[-1], Nbar))
    kers = [_kernel(P) for P in powers]
    tops = []
    chosen = Subspace.zero(d)
    for length in range(m, 0, -1):
        # vectors of K_l not in K_{l-1} + N(K_{l+1}) + already produced chains
        base = kers[length - 1] + (kers[min(length + 1, m)].image(Nbar)) + chosen
        base = base & kers[length]
        for v in kers[length].rows:
            if not base.contains(v):
                tops.append((list(v), length))
                chain = [matvec(powers[i], v) for i in range(length)]
                chosen = chosen + Subspace.span(d, chain)
                base = base + Subspace.span(d, [v])
    return tops


def relative_weight_filtration(N: Matrix, W: IncFiltration) -> IncFiltration | None:
    """The relative weight filtration, or None when it does not exist."""
    n = len(N)
    for j in range(W.lo, W.hi + 1):
        if not W[j].is_stable(N):
            raise CheckError("nilpotent map does not preserve W", index=j)
    if is_zero_matrix(N):
        return W
    if not W.pieces:
        return weight_filtration(N, W.lo)
    M: dict[int, Subspace] = {}
    mlo, mhi = W.lo - 2 * n - 2, W.hi + 2 * n + 2

    def Mget(j):
        if j < mlo:
            return Subspace.zero(n)
        return M.get(j, Subspace.zero(n))

    for k in range(W.lo, W.hi + 1):
        Q = Quotient(W[k], W[k - 1])
        if Q.dim == 0:
            continue
        Nbar = Q.induced_map(N)
        low = W[k - 1]
        low_basis = list(low.rows)
        new_vectors: list[tuple[int, tuple]] = []
        for u, length in _jordan_tops(Nbar):
            lift = [ZERO] * n
            for c, v in zip(u, Q.lifts):
                if c:
                    lift = [x + c * y for x, y in zip(lift, v)]
            Nl = mat_power(N, length)
            target = Mget(k - length - 1)
            rhs = [-x for x in matvec(Nl, lift)]
            cols = [matvec(Nl, w) for w in low_basis] + [tuple(-x for x in t) for t in target.rows]
            if cols:
                A = transpose([list(c) for c in cols])
                sol = solve(A, rhs)
            else:
                sol = () if not any(rhs) else None
            if sol is None:
                return None
            for c, w in zip(sol[:len(low_basis)], low_basis):
                if c:
                    lift = [x + c * y for x, y in zip(lift, w)]
            vec = tuple(lift)
            for i in range(length):
                wt = k + length - 1 - 2 * i
                new_vectors.append((wt, vec))
                vec = matvec(N, vec)
        for j in range(mlo, mhi + 1):
            add = [v for wt, v in new_vectors if wt <= j]
            if add:
                M[j] = Mget(j) + Subspace.span(n, add)
    pieces = {j: Mget(j) for j in range(mlo, mhi + 1)}
    R = IncFiltration.from_map(n, pieces)
    if not verify_relative_weight_filtration(N, W, R).ok:
        return None
    return R


def verify_relative_weight_filtration(N: Matrix, W: IncFiltration, R: IncFiltration) -> Report:
    rep = Report("relative weight filtration")
    bad = [j for j in range(R.lo - 1, R.hi + 2) if not all(R[j - 2].contains(matvec(N, v)) for v in R[j].rows)]
    rep.add("lowers weight by two", not bad, failing=bad)
    bad = []
    for k in range(W.lo, W.hi + 1):
        Q = Quotient(W[k], W[k - 1])
        if Q.dim == 0:
            continue
        Nbar = Q.induced_map(N)
        induced = IncFiltration.from_map(Q.dim, {j: Q.project(R[j]) for j in range(R.lo - 1, R.hi + 1)})
        if induced != weight_filtration(Nbar, k):
            bad.append(k)
    rep.add("induces weight filtrations on graded pieces", not bad, failing=bad)
    return rep


# ----------------------------------------------------------------------
# polarization by a Lefschetz element
# ----------------------------------------------------------------------

def check_polarized_by(L: Matrix, I: Bigrading, Q: Matrix, k: int) -> Report:
    """Hard Lefschetz and definiteness of the twisted forms on primitive parts."""
    if not is_split_real(I):
        raise CheckError("bigrading is not Hodge-Tate and split over the reals")
    if not check_morphism_type(L, I, (-1, -1)):
        raise CheckError("Lefschetz element is not of type (-1,-1)")
    QL = matmul(Q, L)
    LtQ = matmul(transpose(L), Q)
    if not is_zero_matrix(mat_add(QL, LtQ)):
        raise CheckError("Lefschetz element is not an infinitesimal automorphism of Q")
    rep = Report("polarized")
    bad_hl = []
    bad_pos = []
    for (p, _), piece in sorted(I.pieces.items()):
        w = 2 * p
        j = w - k
        if j < 0:
            continue
        Lj = mat_power(L, j)
        tgt = I[(p - j, p - j)]
        img = piece.image(Lj)
        if img.dim != piece.dim or tgt.dim != piece.dim or not (img <= tgt):
            bad_hl.append(w)
            continue
        prim = piece & _kernel(mat_power(L, j + 1))
        if prim.dim == 0:
            continue
        sgn = polarization_sign(w)
        G = [[sgn * _bilinear(Q, u, matvec(Lj, [conj(x) for x in v])) for v in prim.rows] for u in prim.rows]
        if not _positive_definite_hermitian(G):
            bad_pos.append(w)
    rep.add("hard Lefschetz", not bad_hl, failing_weights=bad_hl)
    rep.add("primitive positivity", not bad_pos, failing_weights=bad_pos)
    return rep
