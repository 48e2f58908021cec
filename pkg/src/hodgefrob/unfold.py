"""Graded Frobenius algebras, the unfolded product on TV and the unfolding preconditions."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, combinations_with_replacement, permutations
from typing import Sequence

from .degeneration import VHSGerm, _basis_series, psi_filtration
from .frobmod import CubicForm, FrobeniusModule, GradedSpace, Potential, duality_from_pairing, is_generated_by_v2
from .linfilt import Matrix, Subspace, matvec, transpose
from .qseries import MatSeries, Series, exp_nilpotent, series_det
from .report import CheckError, Report

ZERO = Fraction(0)
ONE = Fraction(1)


# ----------------------------------------------------------------------
# algebras
# ----------------------------------------------------------------------

class FrobeniusAlgebra:
    """table[a][b] is the coordinate vector of T_a o T_b."""

    def __init__(self, space: GradedSpace, B: Matrix, table):
        self.space = space
        self.B = [[Fraction(x) for x in row] for row in B]
        self.table = [[tuple(Fraction(x) for x in v) for v in row] for row in table]
        self.delta = duality_from_pairing(self.B)

    @property
    def n(self) -> int:
        return self.space.n

    @property
    def weight(self) -> int:
        return self.space.weight

    def mul(self, u: Sequence, v: Sequence) -> tuple:
        out = [ZERO] * self.n
        for a, x in enumerate(u):
            if not x:
                continue
            for b, y in enumerate(v):
                if not y:
                    continue
                for c, t in enumerate(self.table[a][b]):
                    if t:
                        out[c] += x * y * t
        return tuple(out)

    def basis(self, a: int) -> tuple:
        return tuple(ONE if i == a else ZERO for i in range(self.n))

    def pair(self, u, v):
        return sum((x * self.B[i][j] * y for i, x in enumerate(u) if x for j, y in enumerate(v) if y), ZERO)

    def operator(self, a: int) -> Matrix:
        """Matrix of T_a o (-)."""
        return transpose([list(self.table[a][b]) for b in range(self.n)])

    def restrict(self) -> list[Matrix]:
        """Action matrices of the V_2 basis, i.e. the induced module."""
        return [self.operator(j) for j in self.space.divisor_indices()]

    def __eq__(self, other):
        return (isinstance(other, FrobeniusAlgebra) and self.space == other.space and self.B == other.B
                and self.table == other.table)


def algebra_validate(A: FrobeniusAlgebra) -> Report:
    rep = Report("Frobenius algebra")
    n = A.n
    deg = A.space.degrees()
    e = A.basis(0)
    bad = [a for a in range(n) if A.mul(e, A.basis(a)) != A.basis(a) or A.mul(A.basis(a), e) != A.basis(a)]
    rep.add("unit", not bad, failing=bad[:5])
    bad = [(a, b) for a in range(n) for b in range(a + 1, n) if A.table[a][b] != A.table[b][a]]
    rep.add("commutative", not bad, failing=bad[:5])
    bad = [(a, b, c) for a in range(n) for b in range(n) for c, x in enumerate(A.table[a][b])
           if x and deg[c] != deg[a] + deg[b]]
    rep.add("graded", not bad, failing=bad[:5])
    bad = []
    for a in range(n):
        for b in range(n):
            ab = A.table[a][b]
            for c in range(n):
                if A.mul(ab, A.basis(c)) != A.mul(A.basis(a), A.table[b][c]):
                    bad.append((a, b, c))
    rep.add("associative", not bad, failing=bad[:5])
    bad = []
    for a in range(n):
        for b in range(n):
            for c in range(n):
                if A.pair(A.table[a][b], A.basis(c)) != A.pair(A.basis(b), A.table[a][c]):
                    bad.append((a, b, c))
    rep.add("pairing invariant", not bad, failing=bad[:5])
    sym = [(i, j) for i in range(n) for j in range(i + 1, n) if A.B[i][j] != A.B[j][i]]
    rep.add("pairing symmetric", not sym, failing=sym[:5])
    return rep


def _require_valid(A: FrobeniusAlgebra, what: str) -> FrobeniusAlgebra:
    rep = algebra_validate(A)
    if not rep.ok:
        bad = rep.failures()[0]
        raise CheckError(f"{what} is not a Frobenius algebra", check=bad.name, **bad.where)
    return A


def algebra_from_module_low_weight(M: FrobeniusModule, literal: bool = False, check: bool = True) -> FrobeniusAlgebra:
    """Unit clause, V_2 clause via the module action, and a rule for the rest.

    With ``literal`` the remaining products are zero.  Otherwise they are
    the products forced by the invariance of the pairing: for deg a, deg b > 2
    the product lies in degree deg a + deg b >= 2k - 2 and is determined by
    pairing against e or V_2.  In weight 3 both rules agree.
    """
    k, n = M.weight, M.n
    if k >= 6:
        raise CheckError("no low-weight construction in weight 6 or more", weight=k)
    deg = M.degrees()
    delta = M.require_delta()
    div = {M.divisor_index(j): j for j in range(M.r)}
    table = [[tuple([ZERO] * n) for _ in range(n)] for _ in range(n)]
    for a in range(n):
        for b in range(n):
            if deg[a] == 0 or deg[b] == 0:
                # V_0 is spanned by e = T_0
                other = b if deg[a] == 0 else a
                v = [ZERO] * n
                v[other] = ONE
                table[a][b] = tuple(v)
            elif a in div:
                table[a][b] = tuple(M.action[div[a]][c][b] for c in range(n))
            elif b in div:
                table[a][b] = tuple(M.action[div[b]][c][a] for c in range(n))
            elif not literal and deg[a] + deg[b] <= 2 * k:
                # B(T_a o T_b, T_w) = B(T_b, T_w * T_a) for T_w in V_{2k - deg a - deg b}
                v = [ZERO] * n
                for w in range(n):
                    if deg[w] != 2 * k - deg[a] - deg[b]:
                        continue
                    if deg[w] == 0:
                        val = M.B[b][a]
                    elif w in div:
                        col = [M.action[div[w]][c][a] for c in range(n)]
                        val = M.pair([ONE if i == b else ZERO for i in range(n)], col)
                    else:
                        raise CheckError("no pairing-forced product in this degree", pair=(a, b))
                    if val:
                        v[delta[w]] += val
                table[a][b] = tuple(v)
    A = FrobeniusAlgebra(M.space, M.B, table)
    return _require_valid(A, "low-weight algebra") if check else A


def _apply_monomial(M: FrobeniusModule, mono: tuple, v: Sequence) -> tuple:
    for j in mono:
        v = matvec(M.action[j], v)
    return tuple(v)


def algebra_from_module_generated(M: FrobeniusModule, preimages: dict | None = None,
                                  check: bool = True) -> FrobeniusAlgebra:
    """T_a o T_b = (P_a P_b) * e with T_a = P_a * e.

    ``preimages`` maps each basis index to {sorted monomial tuple: coeff};
    the default comes from the generation certificate.
    """
    ok, cert = is_generated_by_v2(M)
    if not ok:
        raise CheckError("module is not generated by V_2", **cert)
    pre = preimages or cert
    n = M.n
    e = M.unit()
    for a in range(n):
        v = [ZERO] * n
        for mono, c in pre[a].items():
            w = _apply_monomial(M, mono, e)
            v = [x + c * y for x, y in zip(v, w)]
        if tuple(v) != tuple(ONE if i == a else ZERO for i in range(n)):
            raise CheckError("preimage does not map to the basis vector", index=a)
    table = [[None] * n for _ in range(n)]
    for a in range(n):
        for b in range(n):
            v = [ZERO] * n
            for ma, ca in pre[a].items():
                for mb, cb in pre[b].items():
                    w = _apply_monomial(M, tuple(sorted(ma + mb)), e)
                    v = [x + ca * cb * y for x, y in zip(v, w)]
            table[a][b] = tuple(v)
    A = FrobeniusAlgebra(M.space, M.B, table)
    return _require_valid(A, "transferred algebra") if check else A


def algebra_from_module(M: FrobeniusModule) -> FrobeniusAlgebra:
    """The transferred algebra when the module is generated, otherwise the low-weight one."""
    if is_generated_by_v2(M)[0]:
        return algebra_from_module_generated(M)
    return algebra_from_module_low_weight(M)


def compare_algebras(A1: FrobeniusAlgebra, A2: FrobeniusAlgebra) -> Report:
    rep = Report("algebra comparison")
    div = set(A1.space.divisor_indices()) | {0}
    n = A1.n
    bad = [(a, b) for a in div for b in range(n) if A1.table[a][b] != A2.table[a][b]]
    rep.add("agree on V_0 + V_2 times V", not bad, failing=bad[:5])
    diff = [(a, b) for a in range(n) for b in range(a, n) if a not in div and b not in div
            and A1.table[a][b] != A2.table[a][b]]
    rep.add("agree on higher products", not diff, failing=diff[:5])
    return rep


def hat_classical_potential(A: FrobeniusAlgebra) -> CubicForm:
    """c(v, v, v)/6 with c(u, v, w) = B(u o v, w)."""
    n = A.n
    c = [[[A.pair(A.table[a][b], A.basis(w)) for w in range(n)] for b in range(n)] for a in range(n)]
    for a, b, w in combinations_with_replacement(range(n), 3):
        vals = {c[x][y][z] for x, y, z in permutations((a, b, w))}
        if len(vals) != 1:
            raise CheckError("structure tensor is not totally symmetric", triple=(a, b, w))
    phi = CubicForm(n)
    for key in combinations_with_replacement(range(n), 3):
        val = c[key[0]][key[1]][key[2]]
        if val:
            orderings = len(set(permutations(key)))
            phi.add(key, Fraction(orderings, 6) * val)
    return phi


# ----------------------------------------------------------------------
# polynomials in the non-divisor coordinates with series coefficients
# ----------------------------------------------------------------------

class ZPoly:
    """Polynomial in the non-divisor coordinates z_a with Series coefficients.

    Keys are sorted tuples of basis indices (the monomial); the divisor
    variables live inside the series through q_j = exp(tau z_j).
    """

    __slots__ = ("r", "order", "terms")

    def __init__(self, r: int, order: int, terms: dict | None = None):
        self.r = r
        self.order = order
        self.terms = {k: s for k, s in (terms or {}).items() if s}

    @classmethod
    def const(cls, c, r, order) -> "ZPoly":
        return cls(r, order, {(): Series.const(c, r, order)} if c else {})

    @classmethod
    def series(cls, s: Series, mono: tuple = ()) -> "ZPoly":
        return cls(s.r, s.order, {tuple(sorted(mono)): s})

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        return isinstance(other, ZPoly) and self.terms == other.terms

    def __add__(self, other: "ZPoly") -> "ZPoly":
        out = dict(self.terms)
        for k, s in other.terms.items():
            out[k] = out[k] + s if k in out else s
        return ZPoly(self.r, self.order, out)

    def __sub__(self, other: "ZPoly") -> "ZPoly":
        return self + other.scale(-1)

    def scale(self, c) -> "ZPoly":
        if not c:
            return ZPoly(self.r, self.order)
        return ZPoly(self.r, self.order, {k: s.scale(c) for k, s in self.terms.items()})

    def __mul__(self, other: "ZPoly") -> "ZPoly":
        out: dict = {}
        for k1, s1 in self.terms.items():
            for k2, s2 in other.terms.items():
                k = tuple(sorted(k1 + k2))
                p = s1 * s2
                out[k] = out[k] + p if k in out else p
        return ZPoly(self.r, self.order, out)

    def d_coord(self, a: int) -> "ZPoly":
        """Derivative in a non-divisor coordinate."""
        out: dict = {}
        for k, s in self.terms.items():
            m = k.count(a)
            if m:
                kk = list(k)
                kk.remove(a)
                kk = tuple(kk)
                out[kk] = out[kk] + s.scale(m) if kk in out else s.scale(m)
        return ZPoly(self.r, self.order, out)

    def d_divisor(self, j: int) -> "ZPoly":
        """d/dz_j = tau q_j d/dq_j."""
        return ZPoly(self.r, self.order, {k: s.theta(j).tau_shift(1) for k, s in self.terms.items()})

    def at_origin(self) -> "ZPoly":
        """Constant part in q and z."""
        s = self.terms.get(())
        if s is None:
            return ZPoly(self.r, self.order)
        return ZPoly(self.r, self.order, {(): s.q_part((0,) * self.r)})

    def first_nonzero_order(self):
        ds = [s.qdeg_min() for s in self.terms.values()]
        return min(ds) if ds else None

    def __repr__(self):
        if not self.terms:
            return "ZPoly(0)"
        parts = []
        for k, s in sorted(self.terms.items()):
            mon = "*".join(f"z{a}" for a in k)
            parts.append(f"({s!r})" + (f"*{mon}" if mon else ""))
        return "ZPoly(" + " + ".join(parts) + ")"


def _derive(space: GradedSpace, f: ZPoly, a: int) -> ZPoly:
    deg = space.degrees()
    if deg[a] == 2:
        return f.d_divisor(a - space.dims[0])
    return f.d_coord(a)


def potential_polynomial(space: GradedSpace, P: Potential) -> ZPoly:
    """The quantum potential as a function of all coordinates."""
    f = ZPoly(P.r, P.order)
    if P.weight == 3:
        return f + ZPoly.series(P.scalar)
    for a, s in P.linear.items():
        f = f + ZPoly.series(s, (a,))
    # the quadratic sum runs over ordered pairs with phi^{ab} = phi^{ba}
    for (a, b), s in P.quadratic.items():
        f = f + ZPoly.series(s if a == b else s.scale(2), (a, b))
    return f


# ----------------------------------------------------------------------
# the unfolded product
# ----------------------------------------------------------------------

@dataclass
class UnfoldedProduct:
    """entries[(a, b)][c] is the T_c coefficient of T_a o_z T_b."""

    algebra: FrobeniusAlgebra
    potential: Potential
    entries: dict

    @property
    def n(self) -> int:
        return self.algebra.n

    def vector(self, a: int, b: int) -> list:
        return self.entries[(a, b)]

    def constant_tensor(self) -> list:
        return [[tuple(_scalar_at_origin(x) for x in self.entries[(a, b)]) for b in range(self.n)]
                for a in range(self.n)]

    def operator(self, a: int) -> dict:
        """Sparse matrix {(c, b): ZPoly} of T_a o_z (-)."""
        out = {}
        for b in range(self.n):
            for c, x in enumerate(self.entries[(a, b)]):
                if x:
                    out[(c, b)] = x
        return out


def _scalar_at_origin(x: ZPoly):
    s = x.at_origin().terms.get(())
    if s is None:
        return ZERO
    return s.coeff()


def third_partial(space: GradedSpace, f: ZPoly, idx) -> ZPoly:
    for a in idx:
        if not f:
            break
        f = _derive(space, f, a)
    return f


def unfolded_product(A: FrobeniusAlgebra, P: Potential) -> UnfoldedProduct:
    space = A.space
    n, r, D = A.n, P.r, P.order
    if P.r != space.r or P.weight != space.weight:
        raise CheckError("potential does not match the algebra", weight=P.weight, r=P.r)
    delta = A.delta
    if delta is None:
        raise CheckError("pairing is not self-dual in the given basis")
    phi = potential_polynomial(space, P)
    entries = {}
    for a in range(n):
        for b in range(n):
            fab = third_partial(space, phi, (a, b))
            vec = []
            for c in range(n):
                x = ZPoly.const(A.table[a][b][c], r, D)
                if fab:
                    x = x + _derive(space, fab, delta[c])
                vec.append(x)
            entries[(a, b)] = vec
    return UnfoldedProduct(A, P, entries)


def _apply_op(op: dict, vec: list, r: int, D: int) -> list:
    n = len(vec)
    out = [ZPoly(r, D) for _ in range(n)]
    for (c, b), x in op.items():
        if vec[b]:
            out[c] = out[c] + x * vec[b]
    return out


def check_frobenius_manifold(U: UnfoldedProduct, B: Matrix | None = None) -> Report:
    """Invariance of the metric, potentiality, commutativity, unit and associativity."""
    rep = Report("Frobenius manifold")
    A = U.algebra
    space = A.space
    B = A.B if B is None else B
    n, r, D = U.n, U.potential.r, U.potential.order

    def c3(a, b, c):
        s = ZPoly(r, D)
        for d, x in enumerate(U.entries[(a, b)]):
            if x and B[d][c]:
                s = s + x.scale(B[d][c])
        return s

    cache = {(a, b, c): c3(a, b, c) for a in range(n) for b in range(n) for c in range(n)}
    bad = []
    for a, b, c in combinations_with_replacement(range(n), 3):
        base = cache[(a, b, c)]
        for t in set(permutations((a, b, c))):
            if cache[t] != base:
                bad.append((a, b, c))
                break
    rep.add("metric compatibility", not bad, failing=bad[:5])
    bad = []
    for a, b, c, d in combinations_with_replacement(range(n), 4):
        vals = []
        for t in set(permutations((a, b, c, d))):
            vals.append(_derive(space, cache[t[1:]], t[0]))
        if any(v != vals[0] for v in vals):
            bad.append((a, b, c, d))
    rep.add("potentiality", not bad, failing=bad[:5])
    bad = [(a, b) for a in range(n) for b in range(a + 1, n) if U.entries[(a, b)] != U.entries[(b, a)]]
    rep.add("commutative", not bad, failing=bad[:5])
    bad = []
    for b in range(n):
        want = [ZPoly.const(ONE if c == b else ZERO, r, D) for c in range(n)]
        if U.entries[(0, b)] != want:
            bad.append(b)
    rep.add("unit", not bad, failing=bad[:5])
    dz0 = _derive(space, potential_polynomial(space, U.potential), 0)
    rep.add("potential independent of z_0", not dz0)
    ops = [U.operator(a) for a in range(n)]
    bad = []
    for a in range(n):
        for b in range(n):
            ab = U.entries[(a, b)]
            for c in range(n):
                lhs = _apply_op(ops[c], ab, r, D)               # (T_a o T_b) o T_c
                rhs = _apply_op(ops[a], U.entries[(b, c)], r, D)  # T_a o (T_b o T_c)
                if lhs != rhs:
                    diff = [x - y for x, y in zip(lhs, rhs)]
                    order = min(x.first_nonzero_order() for x in diff if x)
                    bad.append({"triple": (a, b, c), "order": order})
    rep.add("associative", not bad, failing=bad[:5])
    if A.weight >= 6:
        rep.notes.append("weight 6 or more: no associativity guarantee")
    return rep


# ----------------------------------------------------------------------
# preconditions for unfolding at a generic point
# ----------------------------------------------------------------------

def _lefschetz_monomials(r: int, m: int):
    return list(combinations_with_replacement(range(r), m))


def hm_precondition_check(G: VHSGerm, e: Sequence | None = None) -> Report:
    """Flat opposite Psi, isotropy identities and generation by the Higgs field."""
    from .vhs2frob import generator
    rep = Report("unfolding preconditions")
    k, n, r, D = G.weight, G.n, G.r, G.order
    psi, prep = psi_filtration(G)
    rep.extend(prep, "Psi.")
    bad = [(j, p) for j, N in enumerate(G.Ns) for p in range(psi.lo, psi.hi)
           if not all(psi[p].contains(matvec(N, v)) for v in psi[p].rows)]
    rep.add("Psi is monodromy invariant", not bad, failing=bad[:5])
    L = G.connection()
    bad = []
    for j, Lj in enumerate(L):
        for p in range(psi.lo, psi.hi):
            for v in psi[p].rows:
                col = Lj.apply(_basis_series([v], r, D)[0])
                if not _vector_series_in(col, psi[p]):
                    bad.append((j, p))
                    break
    rep.add("Psi is flat for the connection dX_{-1}", not bad, failing=bad[:5])
    Qs = MatSeries.from_matrix(G.Q, r, D)
    U = exp_nilpotent(G.Gamma)
    F = G.Finf
    bad = []
    for p in range(F.lo, F.hi + 1):
        A = [U.apply(v) for v in _basis_series(F[p].rows, r, D)]
        Bv = [U.apply(v) for v in _basis_series(F[k - p + 1].rows, r, D)]
        for x in A:
            Qx = Qs.transpose().apply(x)
            for y in Bv:
                s = Series.zero(r, D)
                for a, b in zip(Qx, y):
                    if a and b:
                        s = s + a * b
                if s:
                    bad.append(p)
                    break
            if bad and bad[-1] == p:
                break
    rep.add("Q(F^p, F^(k-p+1)) = 0", not bad, failing=sorted(set(bad)))
    bad = []
    for p in range(psi.lo - 1, psi.hi + 1):
        for x in psi[p].rows:
            for y in psi[k - p - 1].rows:
                if sum((a * G.Q[i][j] * b for i, a in enumerate(x) if a for j, b in enumerate(y) if b), ZERO):
                    bad.append(p)
                    break
            if bad and bad[-1] == p:
                break
    rep.add("Q(Psi_p, Psi_(k-p-1)) = 0", not bad, failing=sorted(set(bad)))
    # generation
    e = generator(G, e)
    const = Subspace.span(n, [e])
    layer = [tuple(e)]
    for _ in range(k):
        layer = [tuple(matvec(N, v)) for v in layer for N in G.Ns]
        const = const + Subspace.span(n, layer)
    rep.add("monodromy logarithms generate from e", const.dim == n, span=const.dim, dim=n)
    order, deficient = _series_generation_order(G, L, e)
    rep.add("Higgs field generates from e for q near 0", order is not None,
            span_order=order, deficient_degree=deficient)
    if order:
        rep.notes.append(f"generation fails at q=0 and holds for q != 0 from order {order}")
    return rep


def _vector_series_in(col: list[Series], S: Subspace) -> bool:
    from .degeneration import _series_vector_coeffs
    return all(S.contains(c) for c in _series_vector_coeffs(col))


def _series_generation_order(G: VHSGerm, L: list[MatSeries], e) -> tuple[int | None, int | None]:
    """Lowest q-order at which the L-monomials on e span each graded piece (None if never)."""
    from .vhs2frob import _series_coords
    k, r, D = G.weight, G.r, G.order
    I = G.bigrading
    ev = _basis_series([e], r, D)[0]
    worst = 0
    for m in range(k + 1):
        block = I[(k - m, k - m)]
        if block.dim == 0:
            continue
        vecs = []
        for mono in _lefschetz_monomials(r, m):
            v = ev
            for j in mono:
                v = L[j].apply(v)
            vecs.append(_series_coords(v, block.rows, r, D))
        best = None
        for sub in combinations(range(len(vecs)), block.dim):
            M = [[vecs[c][i] for c in sub] for i in range(block.dim)]
            d = series_det(M)
            if d:
                o = d.qdeg_min()
                best = o if best is None else min(best, o)
                if best == 0:
                    break
        if best is None:
            return None, 2 * m
        worst = max(worst, best)
    return worst, None
