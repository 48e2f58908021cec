"""Graded V2-Frobenius modules, classical and quantum potentials."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Sequence

from .hodge import Bigrading, check_polarized_by
from .linfilt import (
    Matrix, Subspace, commutator, det, is_zero_matrix, mat_add, mat_scale, matmul, matvec, solve,
    transpose, zeros,
)
from .qseries import MatSeries, Series, default_order
from .report import CheckError, Report
from .scalars import is_real

ZERO = Fraction(0)
ONE = Fraction(1)


# ----------------------------------------------------------------------
# graded spaces and modules
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class GradedSpace:
    weight: int
    dims: tuple  # dim V_0, dim V_2, ..., dim V_{2k}

    def __post_init__(self):
        if len(self.dims) != self.weight + 1:
            raise CheckError("need one dimension per even degree 0..2k", weight=self.weight)
        if any(d < 0 for d in self.dims):
            raise CheckError("negative dimension")

    @property
    def n(self) -> int:
        return sum(self.dims)

    @property
    def r(self) -> int:
        return self.dims[1] if len(self.dims) > 1 else 0

    def degrees(self) -> list[int]:
        """Degree of each basis vector (the tilde map)."""
        out = []
        for p, d in enumerate(self.dims):
            out += [2 * p] * d
        return out

    def indices_of_degree(self, deg: int) -> list[int]:
        return [a for a, t in enumerate(self.degrees()) if t == deg]

    def divisor_indices(self) -> list[int]:
        return self.indices_of_degree(2)

    def block(self, deg: int) -> Subspace:
        return Subspace.coordinate(self.n, self.indices_of_degree(deg))


def duality_from_pairing(B: Matrix) -> list[int] | None:
    """delta with B(T_delta(a), T_b) = [a == b], or None if B is not of that form."""
    n = len(B)
    delta = [None] * n
    for c in range(n):
        row = B[c]
        nz = [b for b in range(n) if row[b]]
        if len(nz) != 1 or row[nz[0]] != 1:
            return None
        a = nz[0]
        if delta[a] is not None:
            return None
        delta[a] = c
    return delta


class FrobeniusModule:
    """Adapted-basis presentation: pairing B and the action matrices of T_j in V_2."""

    def __init__(self, weight: int, dims: Sequence[int], B: Matrix, action: Sequence[Matrix], real: bool = True):
        self.space = GradedSpace(weight, tuple(dims))
        n = self.space.n
        self.B = [[Fraction(x) if is_real(x) else x for x in row] for row in B]
        self.action = [[[Fraction(x) if is_real(x) else x for x in row] for row in A] for A in action]
        self.real = real
        if len(self.B) != n or any(len(row) != n for row in self.B):
            raise CheckError("pairing has the wrong shape", expected=n)
        if len(self.action) != self.space.r:
            raise CheckError("need one action matrix per basis vector of V_2",
                             expected=self.space.r, got=len(self.action))
        for j, A in enumerate(self.action):
            if len(A) != n or any(len(row) != n for row in A):
                raise CheckError("action matrix has the wrong shape", j=j)
        self.delta = duality_from_pairing(self.B)

    @property
    def weight(self) -> int:
        return self.space.weight

    @property
    def dims(self) -> tuple:
        return self.space.dims

    @property
    def n(self) -> int:
        return self.space.n

    @property
    def r(self) -> int:
        return self.space.r

    def degrees(self) -> list[int]:
        return self.space.degrees()

    def unit(self) -> list:
        return [ONE] + [ZERO] * (self.n - 1)

    def divisor_index(self, j: int) -> int:
        """Basis index of the j-th V_2 vector."""
        return self.dims[0] + j

    def require_delta(self) -> list[int]:
        if self.delta is None:
            raise CheckError("pairing is not self-dual in the given basis")
        return self.delta

    def lefschetz(self, w: Sequence) -> Matrix:
        """Multiplication by w = sum w_j T_j."""
        L = zeros(self.n)
        for c, A in zip(w, self.action):
            if c:
                L = mat_add(L, mat_scale(c, A))
        return L

    def bigrading(self) -> Bigrading:
        """I^{p,p} = V_{2(k-p)}."""
        k = self.weight
        pieces = {}
        for p in range(k + 1):
            s = self.space.block(2 * (k - p))
            if s.dim:
                pieces[(p, p)] = s
        return Bigrading(self.n, pieces)

    def pair(self, u: Sequence, v: Sequence):
        return sum((a * self.B[i][j] * b for i, a in enumerate(u) if a for j, b in enumerate(v) if b), ZERO)

    def __eq__(self, other):
        return (isinstance(other, FrobeniusModule) and self.space == other.space and self.B == other.B
                and self.action == other.action)

    def __repr__(self):
        return f"FrobeniusModule(weight={self.weight}, dims={list(self.dims)})"


def validate_module(M: FrobeniusModule) -> Report:
    rep = Report("Frobenius module")
    n, k = M.n, M.weight
    deg = M.degrees()
    rep.add("V_0 spanned by the unit", M.dims[0] == 1, dim_V0=M.dims[0])
    delta = M.delta
    bad = []
    if delta is None:
        rep.add("adapted basis", False, reason="pairing is not a permutation matrix")
    else:
        bad = [a for a in range(n) if deg[delta[a]] != 2 * k - deg[a] or delta[delta[a]] != a]
        rep.add("adapted basis", not bad, failing=bad)
    sym = [(i, j) for i in range(n) for j in range(i + 1, n) if M.B[i][j] != M.B[j][i]]
    rep.add("pairing symmetric", not sym, failing=sym[:5])
    blocks = [(a, b) for a in range(n) for b in range(n) if M.B[a][b] and deg[a] + deg[b] != 2 * k]
    rep.add("pairing matches V_2p with V_2(k-p)", not blocks and (n == 0 or det(M.B) != 0),
            failing=blocks[:5])
    e = M.unit()
    bad_unit = []
    for j, A in enumerate(M.action):
        want = [ZERO] * n
        want[M.divisor_index(j)] = ONE
        if matvec(A, e) != tuple(want):
            bad_unit.append(j)
    rep.add("unit axiom", not bad_unit, failing=bad_unit)
    bad_grade = []
    for j, A in enumerate(M.action):
        for c in range(n):
            for a in range(n):
                if A[c][a] and deg[c] != deg[a] + 2:
                    bad_grade.append((j, c, a))
    rep.add("graded action", not bad_grade, failing=bad_grade[:5])
    bad_sym = []
    for j, A in enumerate(M.action):
        lhs = matmul(transpose(A), M.B)
        rhs = matmul(M.B, A)
        for a in range(n):
            for b in range(n):
                if lhs[a][b] != rhs[a][b]:
                    bad_sym.append((j, a, b))
    rep.add("pairing symmetry of the action", not bad_sym, failing=bad_sym[:5])
    bad_comm = [(i, j) for i in range(M.r) for j in range(i + 1, M.r)
                if not is_zero_matrix(commutator(M.action[i], M.action[j]))]
    rep.add("commuting action", not bad_comm, failing=bad_comm)
    if M.real:
        ok = all(is_real(x) for row in M.B for x in row) and all(is_real(x) for A in M.action for row in A for x in row)
        rep.add("real data", ok)
    return rep


def q_form(M: FrobeniusModule) -> Matrix:
    """Q(T_a, T_b) = (-1)^{k + deg(a)/2} B(T_a, T_b)."""
    k = M.weight
    deg = M.degrees()
    return [[(-1) ** (k + deg[a] // 2) * M.B[a][b] for b in range(M.n)] for a in range(M.n)]


def check_q_form(M: FrobeniusModule) -> Report:
    Q = q_form(M)
    rep = Report("sign-twisted form")
    bad = []
    for j, A in enumerate(M.action):
        if not is_zero_matrix(mat_add(matmul(Q, A), matmul(transpose(A), Q))):
            bad.append(j)
    rep.add("action preserves the form infinitesimally", not bad, failing=bad)
    return rep


# ----------------------------------------------------------------------
# cubic forms
# ----------------------------------------------------------------------

@dataclass
class CubicForm:
    """Homogeneous cubic in z_0..z_m keyed by sorted index triples."""

    n: int
    coeffs: dict = field(default_factory=dict)

    def add(self, idx, c):
        key = tuple(sorted(idx))
        v = self.coeffs.get(key, ZERO) + c
        if v:
            self.coeffs[key] = v
        else:
            self.coeffs.pop(key, None)

    def third_partial(self, a: int, b: int, c: int):
        key = tuple(sorted((a, b, c)))
        coef = self.coeffs.get(key, ZERO)
        if not coef:
            return ZERO
        mult = 1
        for x in set(key):
            mult *= factorial(key.count(x))
        return coef * mult

    def __eq__(self, other):
        return isinstance(other, CubicForm) and self.n == other.n and self.coeffs == other.coeffs

    def to_string(self) -> str:
        from .scalars import fmt
        if not self.coeffs:
            return "0"
        parts = []
        for key in sorted(self.coeffs):
            mon = "*".join(f"z{i}" if key.count(i) == 1 else f"z{i}^{key.count(i)}" for i in sorted(set(key)))
            c = self.coeffs[key]
            parts.append(mon if c == 1 else f"-{mon}" if c == -1 else f"{fmt(c)}*{mon}")
        return " + ".join(parts)


def _c_weight(k: int, deg: int) -> int:
    if k == 3 and deg == 2:
        return 2
    if k != 3 and (deg == 2 or deg == 2 * k - 4):
        return 3
    return 6


def classical_potential(M: FrobeniusModule) -> CubicForm:
    n, k = M.n, M.weight
    deg = M.degrees()
    phi = CubicForm(n)
    for jj, A in enumerate(M.action):
        j = M.divisor_index(jj)
        for a in range(n):
            col = [A[c][a] for c in range(n)]
            if not any(col):
                continue
            weight = Fraction(_c_weight(k, deg[a]), 12)
            for b in range(n):
                val = M.pair(col, [ONE if i == b else ZERO for i in range(n)])
                if val:
                    phi.add((j, a, b), weight * val)
    return phi


def action_from_potential(space: GradedSpace, B: Matrix, phi: CubicForm) -> list[Matrix]:
    delta = duality_from_pairing(B)
    if delta is None:
        raise CheckError("pairing is not self-dual in the given basis")
    n = space.n
    deg = space.degrees()
    out = []
    for j in space.divisor_indices():
        A = zeros(n)
        for a in range(n):
            for c in range(n):
                if deg[c] == deg[a] + 2:
                    A[c][a] = phi.third_partial(j, a, delta[c])
        out.append(A)
    return out


def module_from_potential(weight: int, dims, B: Matrix, phi: CubicForm) -> tuple[FrobeniusModule, Report]:
    space = GradedSpace(weight, tuple(dims))
    M = FrobeniusModule(weight, dims, B, action_from_potential(space, B, phi))
    return M, validate_module(M)


# ----------------------------------------------------------------------
# quantum potentials
# ----------------------------------------------------------------------

class Potential:
    """Quantum part of a potential, shaped by the weight.

    Weight 3 carries one series; higher weights carry a linear part indexed by
    basis vectors of degree 2k-4 and a quadratic part indexed by pairs a <= b
    with 2 < deg a < 2k-4 and deg a + deg b = 2k-2.  Weights 1 and 2 admit none.
    The quadratic part is symmetric, phi^{ab} = phi^{ba}, and enters the
    potential summed over ordered pairs, so d_a d_b sees 2 phi^{ab}.
    """

    def __init__(self, weight: int, r: int, order: int | None = None, scalar: Series | None = None,
                 linear: dict | None = None, quadratic: dict | None = None):
        self.weight = weight
        self.r = r
        self.order = default_order() if order is None else order
        zero = Series.zero(r, self.order)
        self.scalar = scalar.with_order(self.order) if scalar is not None else zero
        self.linear = {a: s.with_order(self.order) for a, s in (linear or {}).items() if s}
        self.quadratic = {}
        for (a, b), s in (quadratic or {}).items():
            if s:
                key = (min(a, b), max(a, b))
                if key in self.quadratic and self.quadratic[key] != s:
                    raise CheckError("conflicting quadratic entries", pair=key)
                self.quadratic[key] = s.with_order(self.order)
        for s in [self.scalar, *self.linear.values(), *self.quadratic.values()]:
            if s.r != r:
                raise CheckError("series has the wrong number of variables", expected=r)
            if s.has_logs():
                raise CheckError("potential series may not contain log symbols")
        if weight in (1, 2) and not self.is_zero():
            raise CheckError("weights 1 and 2 admit no quantum deformation", weight=weight)
        if weight != 3 and self.scalar:
            raise CheckError("a single-series potential is only allowed in weight 3", weight=weight)
        if weight == 3 and (self.linear or self.quadratic):
            raise CheckError("weight 3 potentials are a single series", weight=weight)

    @classmethod
    def zero(cls, weight: int, r: int, order: int | None = None) -> "Potential":
        return cls(weight, r, order)

    def is_zero(self) -> bool:
        return not self.scalar and not self.linear and not self.quadratic

    def with_order(self, order: int) -> "Potential":
        return Potential(self.weight, self.r, order, self.scalar, self.linear, self.quadratic)

    def __eq__(self, other):
        return (isinstance(other, Potential) and self.weight == other.weight and self.r == other.r
                and self.scalar == other.scalar and self.linear == other.linear
                and self.quadratic == other.quadratic)

    def series(self) -> list[tuple[str, tuple, Series]]:
        out = []
        if self.scalar:
            out.append(("scalar", (), self.scalar))
        out += [("linear", (a,), s) for a, s in sorted(self.linear.items())]
        out += [("quadratic", ab, s) for ab, s in sorted(self.quadratic.items())]
        return out

    def derivative(self, M: FrobeniusModule, idx: Sequence[int]) -> Series:
        """Partial derivative in the basis coordinates, at zero non-divisor coordinates."""
        r, D = self.r, self.order
        deg = M.degrees()
        div = [a for a in idx if deg[a] == 2]
        other = sorted(a for a in idx if deg[a] != 2)
        if any(a == 0 for a in other) and deg[0] == 0:
            return Series.zero(r, D)
        if self.weight == 3:
            base = self.scalar if not other else Series.zero(r, D)
        elif len(other) == 1:
            base = self.linear.get(other[0], Series.zero(r, D))
        elif len(other) == 2:
            s = self.quadratic.get((other[0], other[1]))
            base = s.scale(2) if s is not None else Series.zero(r, D)
        else:
            base = Series.zero(r, D)
        for a in div:
            if not base:
                break
            base = base.theta(a - M.dims[0]).tau_shift(1)
        return base


def check_potential_shape(M: FrobeniusModule, P: Potential) -> Report:
    rep = Report("potential shape")
    k = M.weight
    deg = M.degrees()
    rep.add("variable count matches V_2", P.r == M.r, expected=M.r, got=P.r)
    bad = [a for a in P.linear if not (0 <= a < M.n and deg[a] == 2 * k - 4)]
    rep.add("linear indices of degree 2k-4", not bad, failing=bad)
    bad = [ab for ab in P.quadratic
           if not (0 <= ab[0] < M.n and 0 <= ab[1] < M.n and 2 < deg[ab[0]] < 2 * k - 4
                   and 2 < deg[ab[1]] < 2 * k - 4 and deg[ab[0]] + deg[ab[1]] == 2 * k - 2)]
    rep.add("quadratic indices", not bad, failing=bad)
    zero = (0,) * P.r
    bad = [(kind, idx) for kind, idx, s in P.series() if s.q_part(zero)]
    rep.add("series vanish at q=0", not bad, failing=bad)
    return rep


def quantum_action(M: FrobeniusModule, P: Potential) -> list[MatSeries]:
    """Matrices of T_j ._q (-) as series."""
    delta = M.require_delta()
    n, r, D = M.n, M.r, P.order
    deg = M.degrees()
    out = []
    for jj, A in enumerate(M.action):
        j = M.divisor_index(jj)
        ent = {}
        for a in range(n):
            for c in range(n):
                s = Series.const(A[c][a], r, D) if A[c][a] else Series.zero(r, D)
                if deg[c] == deg[a] + 2 and not P.is_zero():
                    s = s + P.derivative(M, (j, a, delta[c]))
                if s:
                    ent[(c, a)] = s
        out.append(MatSeries(n, r, D, ent))
    return out


def quantum_product(M: FrobeniusModule, P: Potential, j: int, a: int) -> list[Series]:
    """Coordinates of T_j ._q T_a; j indexes V_2 (0-based), a the basis."""
    if not 0 <= j < M.r:
        raise IndexError(f"divisor index {j} out of range")
    if not 0 <= a < M.n:
        raise IndexError(f"basis index {a} out of range")
    L = quantum_action(M, P)[j]
    return L.column(a)


def validate_quantum_potential(M: FrobeniusModule, P: Potential) -> Report:
    rep = Report("quantum potential")
    rep.extend(check_potential_shape(M, P))
    if not rep.ok or M.delta is None:
        return rep
    if M.weight <= 3 or P.is_zero():
        return rep
    Ls = quantum_action(M, P)
    n = M.n
    e = [Series.const(1, P.r, P.order)] + [Series.zero(P.r, P.order)] * (n - 1)
    bad = []
    for jj, L in enumerate(Ls):
        col = L.apply(e)
        for c in range(n):
            want = ONE if c == M.divisor_index(jj) else ZERO
            if col[c] != Series.const(want, P.r, P.order):
                bad.append((jj, c))
    rep.add("quantum unit axiom", not bad, failing=bad[:5])
    Bm = MatSeries.from_matrix(M.B, P.r, P.order)
    bad = []
    for jj, L in enumerate(Ls):
        diff = L.transpose() * Bm - Bm * L
        if diff:
            bad.append({"j": jj, "order": diff.first_nonzero_order()})
    rep.add("quantum pairing symmetry", not bad, failing=bad[:5])
    bad = []
    for i in range(len(Ls)):
        for j in range(i + 1, len(Ls)):
            C = Ls[i].commutator(Ls[j])
            if C:
                key = min(C.entries, key=lambda ij: C.entries[ij].qdeg_min())
                bad.append({"pair": (i, j), "order": C.first_nonzero_order(), "entry": key})
    rep.add("quantum commutativity", not bad, failing=bad[:5])
    return rep


# ----------------------------------------------------------------------
# generation and polarization
# ----------------------------------------------------------------------

def is_generated_by_v2(M: FrobeniusModule) -> tuple[bool, dict]:
    """Whether Sym V_2 -> V, P -> P*e is onto; certificate or first deficient degree."""
    n = M.n
    deg = M.degrees()
    layer = [((), tuple(M.unit()))]
    found: list[tuple[tuple, tuple]] = []
    for p in range(M.weight + 1):
        span = Subspace.span(n, [v for _, v in layer])
        want = M.space.block(2 * p)
        if span != want:
            return False, {"deficient_degree": 2 * p, "span_dim": span.dim, "needed": want.dim}
        found += layer
        nxt = []
        seen = set()
        for mono, v in layer:
            for jj, A in enumerate(M.action):
                key = tuple(sorted(mono + (jj,)))
                if key in seen:
                    continue
                seen.add(key)
                nxt.append((key, matvec(A, v)))
        layer = nxt
    cert = {}
    for a in range(n):
        same = [(m, v) for m, v in found if len(m) == deg[a] // 2]
        cols = transpose([list(v) for _, v in same])
        target = [ONE if i == a else ZERO for i in range(n)]
        x = solve(cols, target)
        cert[a] = {m: c for (m, _), c in zip(same, x) if c}
    return True, cert


def polarizes(M: FrobeniusModule, w: Sequence) -> Report:
    w = list(w)
    if len(w) == M.n:
        deg = M.degrees()
        if any(c and deg[a] != 2 for a, c in enumerate(w)):
            raise CheckError("element is not in V_2")
        w = [w[M.divisor_index(j)] for j in range(M.r)]
    if len(w) != M.r:
        raise CheckError("element has the wrong length", expected=M.r)
    if not all(is_real(c) for c in w):
        raise CheckError("element is not real")
    L = M.lefschetz(w)
    return check_polarized_by(L, M.bigrading(), q_form(M), M.weight)


def check_framing(M: FrobeniusModule) -> Report:
    """The sum of the framing vectors must polarize; boundary membership is not decided."""
    rep = polarizes(M, [ONE] * M.r)
    rep.title = "framing"
    return rep
