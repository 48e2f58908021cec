"""Asymptotics of degenerating variations: germs, Gamma, X, the Higgs field and Psi."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

from .hodge import MHS, Bigrading, deligne_bigrading, weight_filtration
from .linfilt import (
    DecFiltration, IncFiltration, Matrix, convolve, dual, identity, inverse, is_opposite, is_zero_matrix,
    mat_add, mat_scale, matmul, matvec, transpose, zeros,
)
from .qseries import (
    MatSeries, Series, exp_nilpotent, inverse_unipotent, invert_coordinate_change, log_unipotent, monomials,
    series_det,
)
from .report import CheckError, Report

ZERO = Fraction(0)
ONE = Fraction(1)


# ----------------------------------------------------------------------
# grading of endomorphisms
# ----------------------------------------------------------------------

class GBigrading:
    """Block decomposition of End(V) induced by a bigrading.

    The block sending I^{a,b} to I^{c,d} lies in g^{c-a, d-b}.
    """

    def __init__(self, I: Bigrading):
        self.I = I
        self.n = I.n
        cols, owner = [], []
        for pq in I.support():
            for v in I.pieces[pq].rows:
                cols.append(list(v))
                owner.append(pq)
        if len(cols) != self.n:
            raise CheckError("bigrading is not a direct sum")
        self.owner = owner
        self.P = transpose(cols) if cols else []
        self.Pinv = inverse(self.P) if cols else []
        self._coordinate = self.P == identity(self.n)

    def shift(self, i: int, j: int) -> tuple[int, int]:
        """Bidegree of the elementary block from basis slot j to slot i."""
        a, b = self.owner[j]
        c, d = self.owner[i]
        return c - a, d - b

    def dims(self) -> dict[tuple[int, int], int]:
        out: dict = {}
        for i in range(self.n):
            for j in range(self.n):
                rs = self.shift(i, j)
                out[rs] = out.get(rs, 0) + 1
        return dict(sorted(out.items()))

    def basis(self, rs: tuple[int, int]) -> list[Matrix]:
        out = []
        for i in range(self.n):
            for j in range(self.n):
                if self.shift(i, j) == tuple(rs):
                    E = zeros(self.n)
                    E[i][j] = ONE
                    out.append(matmul(matmul(self.P, E), self.Pinv))
        return out

    # projections --------------------------------------------------------
    def _to_blocks(self, X):
        if self._coordinate:
            return X
        if isinstance(X, MatSeries):
            P = MatSeries.from_matrix(self.Pinv, X.r, X.order, lbound=X.lbound)
            Pi = MatSeries.from_matrix(self.P, X.r, X.order, lbound=X.lbound)
            return P * X * Pi
        return matmul(matmul(self.Pinv, X), self.P)

    def _from_blocks(self, Y):
        if self._coordinate:
            return Y
        if isinstance(Y, MatSeries):
            P = MatSeries.from_matrix(self.P, Y.r, Y.order, lbound=Y.lbound)
            Pi = MatSeries.from_matrix(self.Pinv, Y.r, Y.order, lbound=Y.lbound)
            return P * Y * Pi
        return matmul(matmul(self.P, Y), self.Pinv)

    def project(self, X, pred):
        """Keep the blocks whose bidegree (r, s) satisfies pred(r, s)."""
        Y = self._to_blocks(X)
        if isinstance(Y, MatSeries):
            Z = Y.like({ij: v for ij, v in Y.entries.items() if pred(*self.shift(*ij))})
        else:
            Z = [[Y[i][j] if pred(*self.shift(i, j)) else ZERO for j in range(self.n)] for i in range(self.n)]
        return self._from_blocks(Z)

    def level(self, X, r: int):
        return self.project(X, lambda a, b: a == r)

    def minus(self, X):
        return self.project(X, lambda a, b: a < 0)

    def p_minus1(self, X):
        return self.project(X, lambda a, b: a == -1)

    def levels(self, X) -> set[int]:
        Y = self._to_blocks(X)
        if isinstance(Y, MatSeries):
            return {self.shift(*ij)[0] for ij in Y.entries}
        return {self.shift(i, j)[0] for i in range(self.n) for j in range(self.n) if Y[i][j]}

    def in_minus(self, X) -> bool:
        return all(r < 0 for r in self.levels(X))

    def psi(self) -> IncFiltration:
        """Psi_p = sum of I^{a,b} with a <= p."""
        ps = [p for p, _ in self.I.pieces] or [0]
        return IncFiltration.from_map(self.n, {p: self.I.span(lambda a, b, p=p: a <= p)
                                               for p in range(min(ps) - 1, max(ps) + 1)})


def g_bigrading(I: Bigrading) -> tuple[GBigrading, Report]:
    g = GBigrading(I)
    rep = Report("endomorphism bigrading")
    dims = g.dims()
    expected = sum(s.dim for s in I.pieces.values()) ** 2
    rep.add("dimension count", sum(dims.values()) == expected)
    psi = g.psi()
    bad = []
    for rs in dims:
        if rs[0] >= 0:
            continue
        for X in g.basis(rs):
            for p in range(psi.lo - 1, psi.hi + 1):
                if not all(psi[p - 1].contains(matvec(X, v)) for v in psi[p].rows):
                    bad.append((rs, p))
                    break
    rep.add("negative part lowers Psi", not bad, failing=bad[:5])
    return g, rep


# ----------------------------------------------------------------------
# germs
# ----------------------------------------------------------------------

@dataclass
class VHSGerm:
    weight: int
    Finf: DecFiltration
    Ns: list
    Q: Matrix
    Gamma: MatSeries
    W: IncFiltration | None = None
    extra: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.Finf.n

    @property
    def r(self) -> int:
        return self.Gamma.r

    @property
    def order(self) -> int:
        return self.Gamma.order

    def N_sum(self) -> Matrix:
        S = zeros(self.n)
        for N in self.Ns:
            S = mat_add(S, N)
        return S

    @cached_property
    def weight_filtration(self) -> IncFiltration:
        """The recorded limit weight filtration, by default W(sum N) centered at k."""
        if self.W is not None:
            return self.W
        return weight_filtration(self.N_sum(), self.weight)

    @cached_property
    def bigrading(self) -> Bigrading:
        return deligne_bigrading(MHS(self.Finf, self.weight_filtration))

    @cached_property
    def gb(self) -> GBigrading:
        return GBigrading(self.bigrading)

    def Ns_series(self) -> list[MatSeries]:
        return [MatSeries.from_matrix(N, self.r, self.order) for N in self.Ns]

    def gamma_level(self, r: int) -> MatSeries:
        return self.gb.level(self.Gamma, r)

    def with_gamma(self, Gamma: MatSeries) -> "VHSGerm":
        return VHSGerm(self.weight, self.Finf, self.Ns, self.Q, Gamma, self.W)

    def connection(self) -> list[MatSeries]:
        """Components N_j + d/dz_j Gamma_{-1} of dX_{-1}."""
        G1 = self.gamma_level(-1)
        return [N + G1.derive_z(j) for j, N in enumerate(self.Ns_series())]

    def __eq__(self, other):
        return (isinstance(other, VHSGerm) and self.weight == other.weight and self.Finf == other.Finf
                and self.Ns == other.Ns and self.Q == other.Q and self.Gamma == other.Gamma
                and self.weight_filtration == other.weight_filtration)


def validate_germ(G: VHSGerm) -> Report:
    rep = Report("germ")
    bad = [j for j, N in enumerate(G.Ns) if not is_zero_matrix(mat_add(matmul(G.Q, N), matmul(transpose(N), G.Q)))]
    rep.add("monodromy logarithms preserve Q", not bad, failing=bad)
    bad = [(i, j) for i in range(len(G.Ns)) for j in range(i + 1, len(G.Ns))
           if not is_zero_matrix(mat_add(matmul(G.Ns[i], G.Ns[j]), mat_scale(-1, matmul(G.Ns[j], G.Ns[i]))))]
    rep.add("monodromy logarithms commute", not bad, failing=bad)
    zero = (0,) * G.r
    rep.add("Gamma vanishes at the origin", not G.Gamma.q_part(zero))
    try:
        g = G.gb
    except CheckError as exc:
        rep.add("limiting mixed Hodge structure", False, reason=str(exc))
        return rep
    rep.add("Gamma in the negative subalgebra", g.in_minus(G.Gamma))
    Qs = MatSeries.from_matrix(G.Q, G.r, G.order)
    rep.add("Gamma preserves Q", not (Qs * G.Gamma + G.Gamma.transpose() * Qs))
    bad = [j for j, N in enumerate(G.Ns) if g.levels(N) - {-1}]
    rep.add("monodromy logarithms of level -1", not bad, failing=bad)
    return rep


# ----------------------------------------------------------------------
# Gamma from Gamma_{-1}
# ----------------------------------------------------------------------

def _qpart_by_exp(M: MatSeries, exps) -> dict:
    """Split a MatSeries into q-homogeneous pieces for the listed exponents."""
    out = {e: {} for e in exps}
    r = M.r
    for ij, s in M.entries.items():
        for k, c in s.terms.items():
            e = k[1:1 + r]
            if e in out:
                out[e].setdefault(ij, {})[k] = c
    out = {e: {ij: M.entries[ij].like(t) for ij, t in d.items()} for e, d in out.items()}
    return {e: M.like(d) for e, d in out.items()}


def _solve_shifted(N: MatSeries, R: MatSeries, weight: int) -> MatSeries:
    """Solve tau*weight*E + [N, E] = R with N nilpotent (weight > 0)."""
    c = Fraction(1, weight)
    term = R.map(lambda s: s.tau_shift(-1)).scale(c)
    E = term
    for _ in range(R.n * 2 + 2):
        term = (N * term - term * N).map(lambda s: s.tau_shift(-1)).scale(-c)
        if not term:
            return E
        E = E + term
    raise CheckError("adjoint action is not nilpotent")


def gamma_from_gamma_minus1(Finf: DecFiltration, Ns: Sequence[Matrix], Gm1: MatSeries,
                            gb: GBigrading | None = None) -> MatSeries:
    """Reconstruct Gamma from its level -1 part using horizontality.

    With U = exp(Gamma) and L_j = N_j + d_j Gamma_{-1}, horizontality reads
    d_j U = U L_j - N_j U; the q^m coefficient is determined by lower ones.
    """
    n, r, D = Gm1.n, Gm1.r, Gm1.order
    zero = (0,) * r
    if Gm1.q_part(zero):
        raise CheckError("Gamma_{-1} does not vanish at the origin")
    if gb is not None and (gb.levels(Gm1) - {-1}):
        raise CheckError("input is not of level -1")
    Nser = [MatSeries.from_matrix(N, r, D) for N in Ns]
    dG = [Gm1.derive_z(j) for j in range(r)]
    U = MatSeries.identity(n, r, D)
    for d in range(1, D + 1):
        exps = [e for e in monomials(r, d, d)]
        rhs = [_qpart_by_exp(U * dG[j], exps) for j in range(r)]
        new = {}
        for e in exps:
            j0 = next(j for j in range(r) if e[j])
            E = _solve_shifted(Nser[j0], rhs[j0][e], e[j0])
            for j in range(r):
                lhs = (Nser[j] * E - E * Nser[j]) + E.map(lambda s: s.tau_shift(1)).scale(e[j])
                if lhs != rhs[j][e]:
                    diff = lhs - rhs[j][e]
                    raise CheckError("horizontality is obstructed", order=d, exponent=list(e), variable=j,
                                     entry=sorted(diff.entries)[0])
            for ij, s in E.entries.items():
                new[ij] = new[ij] + s if ij in new else s
        U = U + U.like(new)
    Gamma = log_unipotent(U)
    if gb is not None:
        if not gb.in_minus(Gamma):
            raise CheckError("reconstructed Gamma leaves the negative subalgebra")
        if gb.p_minus1(Gamma) != Gm1:
            bad = gb.p_minus1(Gamma) - Gm1
            raise CheckError("Gamma_{-1} is not integrable", order=bad.first_nonzero_order())
    return Gamma


# ----------------------------------------------------------------------
# normal form
# ----------------------------------------------------------------------

def gamma_normal_form(frame: MatSeries, Finf: DecFiltration, I: Bigrading) -> MatSeries:
    """The negative-valued Gamma with exp(Gamma).Finf = frame.Finf.

    ``frame`` is an invertible matrix series whose constant term stabilizes Finf.
    """
    g = GBigrading(I)
    n, r, D = frame.n, frame.r, frame.order
    g0 = frame.constant_matrix()
    if frame.q_part((0,) * r).has_logs() or any(len(s.q_part((0,) * r).terms) > 1 for s in frame.entries.values()):
        raise CheckError("constant term must be an exact matrix")
    for p in range(Finf.lo - 1, Finf.hi + 1):
        if Finf[p].image(g0) != Finf[p]:
            raise CheckError("the germ does not pass through Finf", index=p)
    h = frame * MatSeries.from_matrix(inverse(g0), r, D)
    Gamma = MatSeries.zero(n, r, D)
    for d in range(1, D + 1):
        cur = log_unipotent(exp_nilpotent(-Gamma) * h)
        part = g.minus(cur)
        piece = part.like({ij: s.like({k: c for k, c in s.terms.items() if sum(k[1:1 + r]) == d})
                           for ij, s in part.entries.items()})
        Gamma = Gamma + piece
    rest = g.minus(log_unipotent(exp_nilpotent(-Gamma) * h))
    if rest:
        raise CheckError("no normal form", order=rest.first_nonzero_order())
    return Gamma


def stabilizes(C: MatSeries, Finf: DecFiltration) -> bool:
    """Every coefficient of C maps each F^p into itself."""
    for p in range(Finf.lo, Finf.hi):
        for v in Finf[p].rows:
            col = C.apply(_basis_series([v], C.r, C.order)[0])
            if not all(Finf[p].contains(c) for c in _series_vector_coeffs(col)):
                return False
    return True


def same_germ_of_filtrations(A: MatSeries, B: MatSeries, Finf: DecFiltration) -> bool:
    """A.Finf == B.Finf through the truncation order, for invertible A, B."""
    A0, B0 = A.constant_matrix(), B.constant_matrix()
    Au = A * MatSeries.from_matrix(inverse(A0), A.r, A.order)
    Bu = B * MatSeries.from_matrix(inverse(B0), B.r, B.order)
    if not all(Finf[p].image(A0) == Finf[p] and Finf[p].image(B0) == Finf[p] for p in range(Finf.lo, Finf.hi)):
        return False
    return stabilizes(inverse_unipotent(Au) * Bu, Finf)


def _series_vector_coeffs(vec: list[Series]) -> list[list]:
    keys = set()
    for s in vec:
        keys |= set(s.terms)
    out = []
    for k in sorted(keys):
        out.append([s.terms.get(k, ZERO) for s in vec])
    return out


# ----------------------------------------------------------------------
# X, horizontality, Higgs field
# ----------------------------------------------------------------------

@dataclass
class XPresentation:
    X: MatSeries
    X_minus1: MatSeries


def nilpotent_orbit_factor(G: VHSGerm, lbound: int | None = None, sign: int = 1) -> MatSeries:
    """exp(sign * sum ell_j N_j) as a series in the log symbols."""
    lb = G.n if lbound is None else lbound
    A = MatSeries.zero(G.n, G.r, G.order, lb)
    for j, N in enumerate(G.Ns):
        ell = Series.ell(j, G.r, G.order, lb)
        A = A + MatSeries.from_matrix(N, G.r, G.order, lbound=lb).map(lambda s, ell=ell: s * ell)
    return exp_nilpotent(A.scale(sign))


def x_from_germ(G: VHSGerm) -> XPresentation:
    lb = G.n
    E = nilpotent_orbit_factor(G, lb)
    U = E * exp_nilpotent(G.Gamma.with_lbound(lb))
    X = log_unipotent(U)
    if not G.gb.in_minus(X):
        raise CheckError("X leaves the negative subalgebra")
    return XPresentation(X, G.gb.p_minus1(X))


def horizontality_check(G: VHSGerm) -> Report:
    """exp(-X) d exp(X) = dX_{-1}, component by component.

    Gamma carries no log symbols, so the dz_j component reduces to
    exp(-Gamma) N_j exp(Gamma) + exp(-Gamma) d_j exp(Gamma) = N_j + d_j Gamma_{-1}.
    """
    rep = Report("horizontality")
    U = exp_nilpotent(G.Gamma)
    Ui = exp_nilpotent(-G.Gamma)
    L = G.connection()
    bad = []
    for j, N in enumerate(G.Ns_series()):
        lhs = Ui * N * U + Ui * U.derive_z(j)
        diff = lhs - L[j]
        if diff:
            bad.append({"variable": j, "order": diff.first_nonzero_order()})
    rep.add("Maurer-Cartan form equals dX_{-1}", not bad, failing=bad)
    return rep


def horizontality_check_with_logs(G: VHSGerm) -> Report:
    """The same identity computed with the full log-symbol presentation of X."""
    rep = Report("horizontality with log symbols")
    xp = x_from_germ(G)
    X = xp.X
    U = exp_nilpotent(X)
    Ui = exp_nilpotent(-X)
    bad = []
    for j in range(G.r):
        lhs = Ui * U.derive_z(j)
        rhs = xp.X_minus1.derive_z(j)
        diff = lhs - rhs
        if diff:
            bad.append({"variable": j, "order": diff.first_nonzero_order()})
    rep.add("Maurer-Cartan form equals dX_{-1}", not bad, failing=bad)
    return rep


def higgs_conditions(G: VHSGerm) -> Report:
    """dX_{-1} wedge dX_{-1} = 0 and d(dX_{-1}) = 0."""
    rep = Report("Higgs field conditions")
    L = G.connection()
    bad = [(i, j) for i in range(G.r) for j in range(i + 1, G.r) if L[i].commutator(L[j])]
    rep.add("wedge square vanishes", not bad, failing=bad)
    bad = [(i, j) for i in range(G.r) for j in range(i + 1, G.r) if L[j].derive_z(i) != L[i].derive_z(j)]
    rep.add("closed", not bad, failing=bad)
    return rep


def higgs_field(G: VHSGerm, check: bool = True) -> tuple[list[MatSeries], Report]:
    """theta_j = exp(X) (dX_{-1})_j exp(-X), with exp(X) = exp(sum ell N) exp(Gamma)."""
    rep = Report("Higgs field")
    if check:
        h = horizontality_check(G)
        rep.extend(h)
        if not h.ok:
            raise CheckError("horizontality fails")
    lb = G.n
    E = nilpotent_orbit_factor(G, lb)
    Ei = nilpotent_orbit_factor(G, lb, sign=-1)
    U = exp_nilpotent(G.Gamma.with_lbound(lb))
    Ui = exp_nilpotent((-G.Gamma).with_lbound(lb))
    thetas = []
    bad = []
    for j, Lj in enumerate(G.connection()):
        Lj = Lj.with_lbound(lb)
        th = E * (U * Lj * Ui) * Ei
        thetas.append(th)
        rest = G.gb.project(th - Lj, lambda a, b: a >= -1)
        if rest:
            bad.append(j)
    rep.add("theta - dX_{-1} has level at most -2", not bad, failing=bad)
    return thetas, rep


# ----------------------------------------------------------------------
# the opposite filtration Psi
# ----------------------------------------------------------------------

def _basis_series(vectors, r, D) -> list[list[Series]]:
    return [[Series.const(x, r, D) if x else Series.zero(r, D) for x in v] for v in vectors]


def psi_filtration(G: VHSGerm) -> tuple[IncFiltration, Report]:
    g = G.gb
    psi = g.psi()
    rep = Report("opposite filtration")
    rep.add("opposite to the limit filtration", is_opposite(G.Finf, psi).ok)
    rW = G.weight_filtration
    bad = [p for p in range(psi.lo - 1, psi.hi + 1) if psi[p] != rW[2 * p]]
    rep.add("equals the even weight pieces", (not bad) or not _is_hodge_tate(G.bigrading), failing=bad)
    # unit-determinant certificate for e^Gamma F^p + Psi_{p-1}; the log factor has determinant 1
    # and preserves Psi, so it does not change the determinant
    U = exp_nilpotent(G.Gamma)
    r, D = G.r, G.order
    bad = []
    for p in range(G.Finf.lo, G.Finf.hi):
        F = G.Finf[p]
        cols = [U.apply(v) for v in _basis_series(F.rows, r, D)]
        cols += _basis_series(psi[p - 1].rows, r, D)
        if len(cols) != G.n:
            bad.append({"p": p, "reason": "dimension"})
            continue
        M = [[cols[j][i] for j in range(G.n)] for i in range(G.n)]
        d = series_det(M)
        if not d.is_unit():
            bad.append({"p": p})
    rep.add("unit determinant through the truncation order", not bad, failing=bad)
    return psi, rep


def _is_hodge_tate(I: Bigrading) -> bool:
    return all(p == q for p, q in I.pieces)


def psi_convolution_check(G: VHSGerm, t: Fraction = Fraction(1, 3)) -> Report:
    rep = Report("Psi as a convolution")
    psi = G.gb.psi()
    rW = G.weight_filtration
    conv = convolve(dual(G.Finf.conj()), rW)
    rep.add("limit filtration", conv == psi)
    # real translate e^{tN}.Finf has bigrading e^{tN} I, hence the same Psi
    Nt = mat_scale(t, G.N_sum())
    g = _exp_matrix(Nt)
    Ft = DecFiltration(G.n, G.Finf.lo, [s.image(g) for s in G.Finf.pieces])
    conv_t = convolve(dual(Ft.conj()), rW)
    rep.add("translated limit filtration", conv_t == psi, t=str(t))
    It = deligne_bigrading(MHS(Ft, rW))
    rep.add("bigrading of the translate", It == G.bigrading.change_basis(g))
    return rep


def _exp_matrix(N: Matrix) -> Matrix:
    n = len(N)
    out = identity(n)
    term = identity(n)
    for k in range(1, n + 1):
        term = mat_scale(Fraction(1, k), matmul(term, N))
        if is_zero_matrix(term):
            break
        out = mat_add(out, term)
    return out


# ----------------------------------------------------------------------
# coordinate changes
# ----------------------------------------------------------------------

def coordinate_change(G: VHSGerm, fs: Sequence[Series], log_over_tau: Sequence | None = None) -> VHSGerm:
    """Germ in the coordinates q~_j = f_j(q) q_j.

    When f_j(0) != 1 its logarithm divided by tau must be supplied as an
    exact value s_j; the limit filtration moves by exp(-sum s_j N_j).
    """
    r, D, n = G.r, G.order, G.n
    if len(fs) != r:
        raise CheckError("need one unit per variable", expected=r)
    zero = (0,) * r
    consts = []
    for j, f in enumerate(fs):
        f = f.with_order(D)
        c0 = f.q_part(zero)
        if not c0 or c0.has_logs() or c0.tau_powers() != {0} or len(c0.terms) != 1:
            raise CheckError("unit must have a nonzero exact constant term", variable=j)
        consts.append(c0.scalar_value())
    s = [ZERO] * r
    for j, c in enumerate(consts):
        if c != 1:
            if log_over_tau is None or log_over_tau[j] is None:
                raise CheckError("log of the constant term must be supplied", variable=j)
            s[j] = Fraction(log_over_tau[j])
        elif log_over_tau is not None and log_over_tau[j]:
            raise CheckError("log of 1 must be zero", variable=j)
    normalized = [f.with_order(D).scale(1 / c) for f, c in zip(fs, consts)]
    A = MatSeries.zero(n, r, D)
    for j, (f, N) in enumerate(zip(normalized, G.Ns)):
        lg = f.log1p_unit()
        A = A + MatSeries.from_matrix(N, r, D).map(lambda x, lg=lg: x * lg.tau_shift(-1))
    H = log_unipotent(exp_nilpotent(-A) * exp_nilpotent(G.Gamma))
    Nt = zeros(n)
    for sj, N in zip(s, G.Ns):
        if sj:
            Nt = mat_add(Nt, mat_scale(-sj, N))
    g = _exp_matrix(Nt)
    gi = _exp_matrix(mat_scale(-1, Nt))
    H = MatSeries.from_matrix(g, r, D) * H * MatSeries.from_matrix(gi, r, D)
    Finf = DecFiltration(n, G.Finf.lo, [p.image(g) for p in G.Finf.pieces])
    # express q through q~: q~_j = c_j * (normalized f_j) * q_j
    inv = invert_coordinate_change(normalized)
    inv = [u.subs_q([Series.q(i, r, D).scale(1 / consts[i]) for i in range(r)]) for u in inv]
    Gamma = H.subs_q(inv)
    return VHSGerm(G.weight, Finf, G.Ns, G.Q, Gamma, G.W)


def symbolic_rescale_check(G: VHSGerm, samples: Sequence[Sequence[Fraction]] | None = None) -> Report:
    """Constant rescalings with log f_j(0) kept as formal symbols.

    The symbol lambda_j / tau rides in the j-th log slot.  Then exp(N~) with
    N~ = -sum (lambda_j/tau) N_j must preserve every Psi_p coefficientwise, and
    at rational sample values the bigrading of the translated limit is the
    translate of the bigrading.
    """
    rep = Report("symbolic rescale")
    n, r = G.n, G.r
    psi = G.gb.psi()
    lb = n
    A = MatSeries.zero(n, r, 0, lb)
    for j, N in enumerate(G.Ns):
        lam = Series.ell(j, r, 0, lb)
        A = A + MatSeries.from_matrix(N, r, 0, lbound=lb).map(lambda x, lam=lam: x * lam)
    E = exp_nilpotent(-A)
    bad = []
    for p in range(psi.lo, psi.hi):
        for v in psi[p].rows:
            col = E.apply(_basis_series([v], r, 0)[0])
            for coeffs in _series_vector_coeffs(col):
                if not psi[p].contains(coeffs):
                    bad.append(p)
                    break
    rep.add("exp(N~) preserves Psi", not bad, failing=sorted(set(bad)))
    samples = samples or [[Fraction(1, 2)] * r, [Fraction(-2, 3) if j % 2 else Fraction(5, 7) for j in range(r)]]
    bad = []
    for s in samples:
        Nt = zeros(n)
        for sj, N in zip(s, G.Ns):
            Nt = mat_add(Nt, mat_scale(-Fraction(sj), N))
        g = _exp_matrix(Nt)
        Ft = DecFiltration(n, G.Finf.lo, [x.image(g) for x in G.Finf.pieces])
        It = deligne_bigrading(MHS(Ft, G.weight_filtration))
        ok = It == G.bigrading.change_basis(g) and GBigrading(It).psi() == psi
        if not ok:
            bad.append([str(x) for x in s])
    rep.add("translated bigrading and Psi", not bad, failing=bad)
    return rep


def random_unit(r: int, D: int, rng: random.Random, density: float = 0.5, span: int = 3) -> Series:
    """1 + random rational terms of positive degree."""
    terms = {(0,) + (0,) * (2 * r): ONE}
    for e in monomials(r, D, 1):
        if rng.random() < density:
            c = Fraction(rng.randint(-span, span), rng.randint(1, span))
            if c:
                terms[(0,) + tuple(e) + (0,) * r] = c
    return Series(r, D, terms)
