"""Random instances: Gorenstein modules, WDVV-valid potentials, split MHS and nilpotents."""

from __future__ import annotations

import random
from fractions import Fraction
from math import factorial
from typing import Sequence

from .frobmod import FrobeniusModule, Potential, check_framing, quantum_action, validate_module
from .hodge import MHS, Bigrading
from .linfilt import (
    Matrix, Subspace, identity, inverse, matmul, nullspace, rank, transpose, zeros,
)
from .qseries import Series
from .report import CheckError
from .scalars import qi

ZERO = Fraction(0)
ONE = Fraction(1)


def _frac(rng: random.Random, span: int = 3, nonzero: bool = False) -> Fraction:
    while True:
        c = Fraction(rng.randint(-span, span), rng.randint(1, span))
        if c or not nonzero:
            return c


# ----------------------------------------------------------------------
# Gorenstein modules from a dual socle generator
# ----------------------------------------------------------------------

def monomials_of_degree(r: int, d: int) -> list[tuple]:
    """Exponent vectors of total degree d, in lexicographically decreasing order."""
    if r == 0:
        return [()] if d == 0 else []
    out = []
    for a in range(d, -1, -1):
        out += [(a,) + rest for rest in monomials_of_degree(r - 1, d - a)]
    return out


def apply_operator(F: dict, alpha: tuple) -> dict:
    """The partial derivative d^alpha applied to the polynomial F."""
    out = {}
    for beta, c in F.items():
        if any(b < a for a, b in zip(alpha, beta)):
            continue
        mult = 1
        for a, b in zip(alpha, beta):
            mult *= factorial(b) // factorial(b - a)
        key = tuple(b - a for a, b in zip(alpha, beta))
        out[key] = out.get(key, ZERO) + c * mult
    return {k: v for k, v in out.items() if v}


def _image_vector(F: dict, alpha: tuple, r: int, k: int) -> tuple:
    deg = k - sum(alpha)
    img = apply_operator(F, alpha)
    return tuple(img.get(m, ZERO) for m in monomials_of_degree(r, deg))


def gorenstein_module(F: dict, r: int, k: int) -> FrobeniusModule:
    """Sym V_2 / Ann(F) with the pairing (fg)(d)F, in an adapted basis.

    Lower degrees use standard monomials; upper degrees the dual basis; the
    middle degree needs a rational self-dual basis.
    """
    from .vhs2frob import _pivot, _self_dual_basis
    # for each p: basis monomials and the images of all monomials
    mons = {p: monomials_of_degree(r, p) for p in range(k + 1)}
    imgs = {p: {m: _image_vector(F, m, r, k) for m in mons[p]} for p in range(k + 1)}
    std = {}
    for p in range(k + 1):
        chosen, span = [], Subspace.zero(len(monomials_of_degree(r, k - p)))
        for m in mons[p]:
            nxt = span + Subspace.span(span.n, [imgs[p][m]])
            if nxt.dim > span.dim:
                chosen.append(m)
                span = nxt
        std[p] = chosen
    if len(std[1]) != r:
        raise CheckError("form does not involve every variable")
    dims = tuple(len(std[p]) for p in range(k + 1))
    # coordinates in R_p: express the image of x^alpha through the standard monomials
    std_imgs = {p: transpose([list(imgs[p][m]) for m in std[p]]) for p in range(k + 1)}

    def coords(p, vec):
        from .linfilt import solve
        x = solve(std_imgs[p], list(vec))
        if x is None:
            raise CheckError("vector outside the quotient")
        return list(x)

    def pair(p, u, v):
        """Pairing of R_p coordinates u with R_{k-p} coordinates v."""
        total = ZERO
        for i, a in enumerate(u):
            if not a:
                continue
            for j, b in enumerate(v):
                if b:
                    mono = tuple(x + y for x, y in zip(std[p][i], std[k - p][j]))
                    total += a * b * apply_operator(F, mono).get((0,) * r, ZERO)
        return total

    # adapted bases as coordinate vectors in the standard monomial bases
    basis: dict[int, list] = {}
    for p in range(k + 1):
        if 2 * p < k:
            basis[p] = [[ONE if i == j else ZERO for i in range(dims[p])] for j in range(dims[p])]
    for p in range(k + 1):
        if 2 * p == k:
            rows = [tuple(ONE if i == j else ZERO for i in range(dims[p])) for j in range(dims[p])]
            basis[p] = [list(v) for v in _self_dual_basis(rows, lambda u, v, p=p: pair(p, u, v))]
        elif 2 * p > k:
            q = k - p
            C = [[pair(q, u, [ONE if i == j else ZERO for i in range(dims[p])]) for j in range(dims[p])]
                 for u in basis[q]]
            X = inverse(C)
            duals = [tuple(X[j][l] for j in range(dims[p])) for l in range(len(basis[q]))]
            basis[p] = [list(v) for v in sorted(duals, key=_pivot)]
    offsets = [sum(dims[:p]) for p in range(k + 1)]
    n = sum(dims)
    B = zeros(n)
    for p in range(k + 1):
        for i, u in enumerate(basis[p]):
            for j, v in enumerate(basis[k - p]):
                B[offsets[p] + i][offsets[k - p] + j] = pair(p, u, v)
    action = []
    for j in range(r):
        A = zeros(n)
        ej = tuple(1 if t == j else 0 for t in range(r))
        for p in range(k):
            # change of basis from adapted to standard coordinates in degree p+1
            Pn = transpose(basis[p + 1])
            Pn_inv = inverse(Pn) if Pn else []
            for i, u in enumerate(basis[p]):
                vec = [ZERO] * len(monomials_of_degree(r, k - p - 1))
                for t, a in enumerate(u):
                    if a:
                        mono = tuple(x + y for x, y in zip(std[p][t], ej))
                        img = _image_vector(F, mono, r, k)
                        vec = [x + a * y for x, y in zip(vec, img)]
                c_std = coords(p + 1, vec)
                c_ad = [sum((Pn_inv[s][t] * c_std[t] for t in range(len(c_std))), ZERO) for s in range(len(c_std))]
                for s, c in enumerate(c_ad):
                    A[offsets[p + 1] + s][offsets[p] + i] = c
        action.append(A)
    # the unit is 1 in degree 0; scale so that B(e, top) = 1 via the dual basis already
    return FrobeniusModule(k, dims, B, action)


def power_sum_form(rng: random.Random, r: int, k: int, terms: int) -> dict:
    """sum of t_i^2/k! * L_i^k for random integer linear forms L_i."""
    F: dict = {}
    for _ in range(terms):
        L = [rng.randint(-2, 2) for _ in range(r)]
        while not any(L):
            L = [rng.randint(-2, 2) for _ in range(r)]
        t = Fraction(rng.randint(1, 3), rng.randint(1, 2))
        c = t * t / factorial(k)
        for mono in monomials_of_degree(r, k):
            coef = Fraction(factorial(k))
            for a, l in zip(mono, L):
                coef = coef / factorial(a) * l ** a
            if coef:
                F[mono] = F.get(mono, ZERO) + c * coef
    return {m: c for m, c in F.items() if c}


def random_form(rng: random.Random, r: int, k: int, density: float = 0.7) -> dict:
    F = {}
    for mono in monomials_of_degree(r, k):
        if rng.random() < density:
            c = _frac(rng, 3)
            if c:
                F[mono] = c
    return F


def add_isolated_pairs(M: FrobeniusModule, degrees: Sequence[int]) -> FrobeniusModule:
    """Adjoin, for each p, a vector of degree 2p and its dual, both killed by V_2.

    The result is no longer generated by V_2.  For the middle degree a single
    self-dual vector is added.
    """
    k = M.weight
    dims = list(M.dims)
    old_deg = M.degrees()
    added = []  # (degree p, partner p')
    for p in degrees:
        if not 2 <= p <= k - 2:
            raise CheckError("isolated vectors must avoid degrees 0, 2, 2k-2, 2k", p=p)
        if 2 * p == k:
            added.append((p, None))
            dims[p] += 1
        else:
            added.append((p, k - p))
            dims[p] += 1
            dims[k - p] += 1
    n_new = sum(dims)
    # place old basis vectors first within each degree, new ones after
    slot = {}
    pos = 0
    for p in range(k + 1):
        for a, d in enumerate(old_deg):
            if d == 2 * p:
                slot[a] = pos
                pos += 1
        pos += dims[p] - M.dims[p]
    new_slots: dict[int, list] = {p: [] for p in range(k + 1)}
    pos = 0
    for p in range(k + 1):
        pos += M.dims[p]
        new_slots[p] = list(range(pos, pos + dims[p] - M.dims[p]))
        pos += dims[p] - M.dims[p]
    B = zeros(n_new)
    for a in range(M.n):
        for b in range(M.n):
            B[slot[a]][slot[b]] = M.B[a][b]
    used = {p: 0 for p in range(k + 1)}
    for p, q in added:
        i = new_slots[p][used[p]]
        used[p] += 1
        if q is None:
            B[i][i] = ONE
        else:
            j = new_slots[q][used[q]]
            used[q] += 1
            B[i][j] = B[j][i] = ONE
    action = []
    for A in M.action:
        An = zeros(n_new)
        for c in range(M.n):
            for a in range(M.n):
                An[slot[c]][slot[a]] = A[c][a]
        action.append(An)
    return FrobeniusModule(k, dims, B, action)


def random_module(rng: random.Random, weight: int, r: int | None = None, max_dim: int = 10,
                  isolated: int = 0, tries: int = 40, framed: bool = False) -> FrobeniusModule:
    """A random valid module of the given weight (generated by V_2 unless isolated > 0).

    With framed=True only modules polarized by the sum of the T_j are returned.
    Isolated vectors are then placed in the middle degree, the only place where
    a vector killed by every T_j is compatible with hard Lefschetz.
    """
    k = weight
    if k == 0:
        return FrobeniusModule(0, (1,), [[1]], [])
    if k == 1:
        # the unit axiom pins the only weight-1 module
        if r not in (None, 1):
            raise CheckError("weight 1 forces dim V_2 = 1", r=r)
        return gorenstein_module({(1,): ONE}, 1, 1)
    for _ in range(tries):
        rr = r if r is not None else rng.choice([1, 1, 2])
        try:
            if rr == 1:
                t = Fraction(rng.randint(1, 3), rng.randint(1, 2))
                F = {(k,): t * t / factorial(k) if k % 2 == 0 else Fraction(rng.randint(1, 6), rng.randint(1, 3))}
            elif k % 2 == 0:
                F = power_sum_form(rng, rr, k, rng.choice([rr, rr + 1]))
            else:
                F = random_form(rng, rr, k) if rng.random() < 0.6 else power_sum_form(rng, rr, k, rr + 1)
            M = gorenstein_module(F, rr, k)
            if isolated:
                choices = [p for p in range(2, k - 1) if not framed or 2 * p == k]
                if choices:
                    M = add_isolated_pairs(M, [rng.choice(choices) for _ in range(isolated)])
        except CheckError:
            continue
        if M.n <= max_dim and validate_module(M).ok and (not framed or check_framing(M).ok):
            return M
    raise CheckError("could not generate a module", weight=k)


# ----------------------------------------------------------------------
# WDVV-valid potentials
# ----------------------------------------------------------------------

def _series_in(u: tuple, coeffs: dict, r: int, D: int) -> Series:
    """sum c_t u^t for the monomial u."""
    terms = {}
    for t, c in coeffs.items():
        e = tuple(t * x for x in u)
        if sum(e) <= D and c:
            terms[(0,) + e + (0,) * r] = Fraction(c)
    return Series(r, D, terms)


def _random_profile(rng: random.Random, u: tuple, D: int) -> dict:
    deg = sum(u)
    top = max(1, D // deg)
    out = {}
    for t in range(1, top + 1):
        if rng.random() < 0.8:
            c = _frac(rng, 4)
            if c:
                out[t] = c
    if not out:
        out[1] = ONE
    return out


def potential_slots(M: FrobeniusModule) -> list[tuple]:
    """("scalar", ()), ("linear", (a,)) and ("quadratic", (a, b)) slots of the potential shape."""
    k = M.weight
    deg = M.degrees()
    if k <= 2:
        return []
    if k == 3:
        return [("scalar", ())]
    out = [("linear", (a,)) for a in range(M.n) if deg[a] == 2 * k - 4]
    out += [("quadratic", (a, b)) for a in range(M.n) for b in range(a, M.n)
            if 2 < deg[a] < 2 * k - 4 and 2 < deg[b] < 2 * k - 4 and deg[a] + deg[b] == 2 * k - 2]
    return out


def _build(M: FrobeniusModule, D: int, slots, coeffs, funcs) -> Potential:
    scalar, linear, quadratic = None, {}, {}
    for (kind, idx), c in zip(slots, coeffs):
        if not c:
            continue
        s = funcs[kind].scale(c)
        if kind == "scalar":
            scalar = s
        elif kind == "linear":
            linear[idx[0]] = s
        else:
            quadratic[idx] = s
    return Potential(M.weight, M.r, D, scalar=scalar, linear=linear, quadratic=quadratic)


def wdvv_conditions(M: FrobeniusModule, D: int, slots, funcs) -> list[list]:
    """Rows of the linear system on slot coefficients for commutativity.

    Valid when every slot function depends on q through one monomial, which
    kills the quadratic part of the commutator.
    """
    cols = []
    base = quantum_action(M, Potential.zero(M.weight, M.r, D))
    for i in range(len(slots)):
        coeffs = [ONE if t == i else ZERO for t in range(len(slots))]
        Ls = quantum_action(M, _build(M, D, slots, coeffs, funcs))
        C = [L - L0 for L, L0 in zip(Ls, base)]
        col = {}
        for a in range(M.r):
            for b in range(a + 1, M.r):
                X = base[a] * C[b] - C[b] * base[a] + C[a] * base[b] - base[b] * C[a]
                for ij, s in X.entries.items():
                    for key, c in s.terms.items():
                        col[(a, b, ij, key)] = c
        cols.append(col)
    keys = sorted(set().union(*[set(c) for c in cols])) if cols else []
    return [[c.get(key, ZERO) for c in cols] for key in keys]


def random_potential(rng: random.Random, M: FrobeniusModule, D: int, direction: tuple | None = None,
                     valid: bool = True, tries: int = 12) -> Potential:
    """A quantum potential of the right shape, WDVV-valid unless ``valid`` is False."""
    slots = potential_slots(M)
    r = M.r
    if not slots:
        return Potential.zero(M.weight, r, D)
    dirs = [direction] if direction else ([(1,)] if r == 1 else
                                         [(1, 0), (0, 1), (1, 1), (2, 1), (1, 2)])
    for _ in range(tries):
        u = rng.choice(dirs)
        funcs = {kind: _series_in(u, _random_profile(rng, u, D), r, D) for kind in ("scalar", "linear", "quadratic")}
        rows = wdvv_conditions(M, D, slots, funcs)
        ns = nullspace(rows, len(slots)) if rows else [tuple(ONE if i == j else ZERO for i in range(len(slots)))
                                                         for j in range(len(slots))]
        if valid:
            if not ns:
                continue
            coeffs = [ZERO] * len(slots)
            for v in ns:
                c = _frac(rng, 3, nonzero=True)
                coeffs = [x + c * y for x, y in zip(coeffs, v)]
            if not any(coeffs):
                continue
            return _build(M, D, slots, coeffs, funcs)
        # an invalid one: leave the nullspace
        if rows and len(ns) < len(slots):
            for _ in range(20):
                coeffs = [_frac(rng, 3) for _ in slots]
                if any(sum((a * b for a, b in zip(row, coeffs)), ZERO) for row in rows):
                    return _build(M, D, slots, coeffs, funcs)
    raise CheckError("no potential found", weight=M.weight, valid=valid)


def tensor_module(M1: FrobeniusModule, M2: FrobeniusModule) -> FrobeniusModule:
    """Tensor product of two modules; V_2 of the product is V_2(M1) + V_2(M2)."""
    k = M1.weight + M2.weight
    deg1, deg2 = M1.degrees(), M2.degrees()
    pairs = sorted(((a, b) for a in range(M1.n) for b in range(M2.n)),
                   key=lambda ab: (deg1[ab[0]] + deg2[ab[1]],
                                   0 if deg1[ab[0]] == 2 and deg2[ab[1]] == 0 else 1, ab))
    # the divisor slots must be T_j (x) e then e (x) T_j, in that order
    index = {ab: i for i, ab in enumerate(pairs)}
    n = len(pairs)
    dims = [0] * (k + 1)
    for a, b in pairs:
        dims[(deg1[a] + deg2[b]) // 2] += 1
    B = zeros(n)
    for (a, b), i in index.items():
        for (c, d), j in index.items():
            B[i][j] = M1.B[a][c] * M2.B[b][d]
    action = []
    for A in M1.action:
        X = zeros(n)
        for (a, b), i in index.items():
            for c in range(M1.n):
                if A[c][a]:
                    X[index[(c, b)]][i] = A[c][a]
        action.append(X)
    for A in M2.action:
        X = zeros(n)
        for (a, b), i in index.items():
            for d in range(M2.n):
                if A[d][b]:
                    X[index[(a, d)]][i] = A[d][b]
        action.append(X)
    return FrobeniusModule(k, dims, B, action)


# ----------------------------------------------------------------------
# mixed Hodge structures and nilpotents
# ----------------------------------------------------------------------

def random_real_unipotent(rng: random.Random, n: int, span: int = 2) -> Matrix:
    U = identity(n)
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.5:
                U[i][j] = Fraction(rng.randint(-span, span))
    perm = list(range(n))
    rng.shuffle(perm)
    P = [[ONE if perm[i] == j else ZERO for j in range(n)] for i in range(n)]
    return matmul(matmul(P, U), transpose(P))


def random_split_mhs(rng: random.Random, n: int, hodge_range: int = 3) -> tuple[Bigrading, MHS]:
    """A mixed Hodge structure split over R built from a random bigrading.

    Pieces I^{p,q} and I^{q,p} are conjugate; diagonal pieces are real.
    """
    while True:
        pieces_dims: dict = {}
        left = n
        while left > 0:
            p, q = rng.randint(0, hodge_range), rng.randint(0, hodge_range)
            if p == q:
                pieces_dims[(p, p)] = pieces_dims.get((p, p), 0) + 1
                left -= 1
            elif left >= 2:
                pieces_dims[(p, q)] = pieces_dims.get((p, q), 0) + 1
                pieces_dims[(q, p)] = pieces_dims.get((q, p), 0) + 1
                left -= 2
        g = random_real_unipotent(rng, n)
        # columns of a real change of basis; complex pairs use v +- i w
        cols = [list(c) for c in transpose(g)]
        vectors: dict = {pq: [] for pq in pieces_dims}
        it = iter(cols)
        done = set()
        for pq, d in sorted(pieces_dims.items()):
            p, q = pq
            if p == q:
                vectors[pq] += [tuple(next(it)) for _ in range(d)]
            elif pq not in done:
                for _ in range(d):
                    v, w = next(it), next(it)
                    z = tuple(qi(a, b) for a, b in zip(v, w))
                    zb = tuple(qi(a, -b) for a, b in zip(v, w))
                    vectors[pq].append(z)
                    vectors[(q, p)].append(zb)
                done |= {pq, (q, p)}
        pieces = {pq: Subspace.span(n, vs) for pq, vs in vectors.items()}
        I = Bigrading(n, pieces)
        return I, I.mhs()


def jordan_nilpotent(rng: random.Random, n: int, blocks: Sequence[int] | None = None,
                     conjugate: bool = True) -> Matrix:
    """A nilpotent with the given Jordan block sizes, conjugated by a random rational matrix."""
    if blocks is None:
        blocks, left = [], n
        while left:
            b = rng.randint(1, left)
            blocks.append(b)
            left -= b
    N = zeros(n)
    pos = 0
    for b in blocks:
        for i in range(b - 1):
            N[pos + i + 1][pos + i] = ONE
        pos += b
    if not conjugate:
        return N
    while True:
        g = [[Fraction(rng.randint(-2, 2)) for _ in range(n)] for _ in range(n)]
        if rank(g) == n:
            break
    return matmul(matmul(g, N), inverse(g))


def random_filtration_mhs(I: Bigrading, g: Matrix) -> MHS:
    """The MHS of g.I for an invertible g."""
    return I.change_basis(g).mhs()


__all__ = [
    "monomials_of_degree", "apply_operator", "gorenstein_module", "power_sum_form", "random_form",
    "add_isolated_pairs", "random_module", "potential_slots", "wdvv_conditions", "random_potential",
    "tensor_module", "random_real_unipotent", "random_split_mhs", "jordan_nilpotent", "random_filtration_mhs",
]
