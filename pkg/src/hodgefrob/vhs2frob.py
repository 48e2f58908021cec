"""From a maximally degenerating germ back to a framed Frobenius module and its potential."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import isqrt
from typing import Sequence

from .degeneration import VHSGerm, coordinate_change, higgs_field, x_from_germ
from .frobmod import FrobeniusModule, Potential, validate_module
from .hodge import is_hodge_tate, is_split_real
from .linfilt import Matrix, Subspace, inverse, matmul, matvec, transpose
from .qseries import MatSeries, Series
from .report import CheckError, Report
from .scalars import is_real

ZERO = Fraction(0)
ONE = Fraction(1)


# ----------------------------------------------------------------------
# the generator and helpers
# ----------------------------------------------------------------------

def generator(G: VHSGerm, e: Sequence | None = None) -> tuple:
    """A real vector spanning I^{k,k}; defaults to the recorded unit, then the echelon basis."""
    top = G.bigrading[(G.weight, G.weight)]
    if top.dim != 1:
        raise CheckError("I^{k,k} is not a line", dim=top.dim)
    if e is None:
        e = G.extra.get("unit") or top.rows[0]
    e = tuple(Fraction(x) if is_real(x) else x for x in e)
    if len(e) != G.n:
        raise CheckError("generator has the wrong length", expected=G.n)
    if not any(e) or not top.contains(e):
        raise CheckError("generator does not span I^{k,k}")
    if not all(is_real(x) for x in e):
        raise CheckError("generator is not real")
    return e


def _series_coords(vec: Sequence[Series], basis: Sequence[Sequence], r: int, D: int) -> list[Series]:
    """Coefficients c_j (series) with vec = sum c_j basis_j; basis is a list of constant vectors."""
    n = len(vec)
    m = len(basis)
    if m == 0:
        if any(vec):
            raise CheckError("vector is not in the span")
        return []
    cols = transpose([list(b) for b in basis])
    rows = Subspace.span(m, cols)  # row space of the n x m matrix
    if rows.dim != m:
        raise CheckError("basis vectors are dependent")
    # pick m independent rows
    chosen, acc = [], Subspace.zero(m)
    for i in range(n):
        nxt = acc + Subspace.span(m, [cols[i]])
        if nxt.dim > acc.dim:
            chosen.append(i)
            acc = nxt
        if len(chosen) == m:
            break
    Minv = inverse([cols[i] for i in chosen])
    zero = Series.zero(r, D)
    out = []
    for j in range(m):
        s = zero
        for t, i in enumerate(chosen):
            if Minv[j][t]:
                s = s + vec[i].scale(Minv[j][t])
        out.append(s)
    for i in range(n):
        s = zero
        for j in range(m):
            if basis[j][i]:
                s = s + out[j].scale(basis[j][i])
        if s != vec[i]:
            raise CheckError("vector is not in the span", row=i)
    return out


def _const_vec(v, r, D) -> list[Series]:
    return [Series.const(x, r, D) if x else Series.zero(r, D) for x in v]


def _require_mum(G: VHSGerm):
    I = G.bigrading
    if not is_hodge_tate(I) or not is_split_real(I):
        raise CheckError("limit is not Hodge-Tate split over the reals")
    k = G.weight
    if I[(k - 1, k - 1)].dim != len(G.Ns):
        raise CheckError("I^{k-1,k-1} does not match the number of variables")


# ----------------------------------------------------------------------
# canonical coordinates
# ----------------------------------------------------------------------

@dataclass
class CanonicalCoordinates:
    """Units f_j with canonical coordinates f_j(q) q_j, and the germ expressed in them."""

    units: list
    germ: VHSGerm

    def coordinates(self) -> list[Series]:
        return [f.times_q(j) for j, f in enumerate(self.units)]

    def is_identity(self) -> bool:
        return all(f == Series.const(1, f.r, f.order) for f in self.units)


def gamma_minus1_on_generator(G: VHSGerm, e: Sequence | None = None) -> list[Series]:
    """Coefficients g_j with Gamma_{-1} e = sum g_j N_j e."""
    e = generator(G, e)
    r, D = G.r, G.order
    vec = G.gamma_level(-1).apply(_const_vec(e, r, D))
    basis = [matvec(N, e) for N in G.Ns]
    return _series_coords(vec, basis, r, D)


def canonical_coordinates(G: VHSGerm, e: Sequence | None = None) -> CanonicalCoordinates:
    """Normalize so that Gamma_{-1} kills I^{k,k}.

    Level -1 parts add under BCH, so the change q~_j = exp(tau g_j) q_j
    removes Gamma_{-1} e = sum g_j N_j e in one step.
    """
    _require_mum(G)
    e = generator(G, e)
    basis = [matvec(N, e) for N in G.Ns]
    if Subspace.span(G.n, basis).dim != len(G.Ns) or Subspace.span(G.n, basis) != G.bigrading[
            (G.weight - 1, G.weight - 1)]:
        raise CheckError("monodromy images of the generator do not span I^{k-1,k-1}")
    g = gamma_minus1_on_generator(G, e)
    r, D = G.r, G.order
    if not any(g):
        return CanonicalCoordinates([Series.const(1, r, D) for _ in range(r)], G)
    fs = [s.tau_shift(1).exp() for s in g]
    H = coordinate_change(G, fs)
    H.extra = dict(G.extra)
    rest = gamma_minus1_on_generator(H, e)
    if any(rest):
        raise CheckError("canonical normalization failed", order=min(s.qdeg_min() for s in rest if s))
    return CanonicalCoordinates(fs, H)


def is_canonical(G: VHSGerm, e: Sequence | None = None) -> bool:
    return not any(gamma_minus1_on_generator(G, e))


# ----------------------------------------------------------------------
# the adapted frame and the module
# ----------------------------------------------------------------------

def _pivot(v) -> int:
    return next(i for i, x in enumerate(v) if x)


def _self_dual_basis(rows: list, form) -> list:
    """A basis whose Gram matrix is a symmetric permutation matrix, over the rationals."""
    gram = [[form(u, v) for v in rows] for u in rows]
    if _is_involution_pattern(gram):
        return rows
    # orthogonal basis with square norms
    vecs = [list(v) for v in rows]
    out = []
    while vecs:
        idx = next((i for i, v in enumerate(vecs) if form(v, v)), None)
        if idx is None:
            # all remaining isotropic: make one anisotropic from a non-orthogonal pair
            pair = next(((i, j) for i in range(len(vecs)) for j in range(i + 1, len(vecs))
                         if form(vecs[i], vecs[j])), None)
            if pair is None:
                raise CheckError("middle pairing is degenerate")
            i, j = pair
            vecs[i] = [a + b for a, b in zip(vecs[i], vecs[j])]
            continue
        v = vecs.pop(idx)
        d = form(v, v)
        root = _rational_sqrt(d)
        if root is None:
            raise CheckError("no rational self-dual basis in the middle degree", norm=str(d))
        v = [x / root for x in v]
        out.append(v)
        vecs = [[a - form(w, v) * b for a, b in zip(w, v)] for w in vecs]
    return [tuple(v) for v in out]


def _rational_sqrt(d):
    if not isinstance(d, Fraction) or d <= 0:
        return None
    a, b = isqrt(d.numerator), isqrt(d.denominator)
    if a * a == d.numerator and b * b == d.denominator:
        return Fraction(a, b)
    return None


def _is_involution_pattern(gram) -> bool:
    m = len(gram)
    for i in range(m):
        nz = [j for j in range(m) if gram[i][j]]
        if len(nz) != 1 or gram[i][nz[0]] != 1 or gram[nz[0]][i] != 1:
            return False
    return True


@dataclass
class AdaptedFrame:
    """Columns of P form the adapted basis, listed by degree 0, 2, ..., 2k."""

    P: Matrix
    dims: tuple
    generator: tuple

    @property
    def Pinv(self) -> Matrix:
        return inverse(self.P)


def adapted_frame(G: VHSGerm, e: Sequence | None = None) -> AdaptedFrame:
    """Basis e; N_j e; echelon bases in the lower half; B-duals in the upper half."""
    _require_mum(G)
    e = generator(G, e)
    k, n = G.weight, G.n
    I = G.bigrading
    Q = G.Q

    def bform(p):
        sign = (-1) ** (k + p)
        return lambda u, v: sign * sum((a * Q[i][j] * b for i, a in enumerate(u) if a
                                        for j, b in enumerate(v) if b), ZERO)

    blocks: dict[int, list] = {}
    blocks[0] = [e]
    if k >= 1:
        blocks[1] = [matvec(N, e) for N in G.Ns]
        if Subspace.span(n, blocks[1]) != I[(k - 1, k - 1)]:
            raise CheckError("framing does not span I^{k-1,k-1}")
    for p in range(2, k + 1):
        if 2 * p < k:
            blocks[p] = list(I[(k - p, k - p)].rows)
    for p in range(0, k + 1):
        if p in blocks or 2 * p < k:
            continue
        q = k - p
        if 2 * p == k:
            blocks[p] = _self_dual_basis(list(I[(k - p, k - p)].rows), bform(p))
            continue
        lower = blocks[q]
        upper = list(I[(k - p, k - p)].rows)
        if len(upper) != len(lower):
            raise CheckError("paired blocks have different dimensions", degree=2 * p)
        C = [[bform(q)(u, w) for w in upper] for u in lower]
        X = inverse(C)
        duals = [tuple(sum((X[j][l] * upper[j][i] for j in range(len(upper))), ZERO) for i in range(n))
                 for l in range(len(lower))]
        blocks[p] = sorted(duals, key=_pivot)
    cols, dims = [], []
    for p in range(k + 1):
        b = blocks.get(p, [])
        dims.append(len(b))
        cols += [tuple(v) for v in b]
    if len(cols) != n:
        raise CheckError("adapted frame does not span", got=len(cols), expected=n)
    P = transpose([list(c) for c in cols])
    return AdaptedFrame(P, tuple(dims), e)


def _pairing_in_frame(G: VHSGerm, fr: AdaptedFrame) -> Matrix:
    k = G.weight
    deg = []
    for p, d in enumerate(fr.dims):
        deg += [p] * d
    QP = matmul(matmul(transpose(fr.P), G.Q), fr.P)
    return [[(-1) ** (k + deg[a]) * QP[a][b] for b in range(G.n)] for a in range(G.n)]


def extract_module(G: VHSGerm, e: Sequence | None = None, frame: AdaptedFrame | None = None) -> FrobeniusModule:
    fr = frame or adapted_frame(G, e)
    Pi = fr.Pinv
    B = _pairing_in_frame(G, fr)
    action = [matmul(matmul(Pi, N), fr.P) for N in G.Ns]
    real = all(is_real(x) for row in B for x in row) and all(is_real(x) for A in action for row in A for x in row)
    M = FrobeniusModule(G.weight, fr.dims, B, action, real=real)
    rep = validate_module(M)
    if not rep.ok:
        raise CheckError("extracted module is invalid", failures=[c.name for c in rep.failures()])
    return M


def gamma_in_frame(G: VHSGerm, fr: AdaptedFrame) -> MatSeries:
    r, D = G.r, G.order
    return MatSeries.from_matrix(fr.Pinv, r, D) * G.Gamma * MatSeries.from_matrix(fr.P, r, D)


def gamma_minus2(G: VHSGerm) -> MatSeries:
    """The g^{-2} component of Gamma."""
    return G.gamma_level(-2)


# ----------------------------------------------------------------------
# product and potential
# ----------------------------------------------------------------------

def quantum_product_from_X(G: VHSGerm, j: int, T: Sequence) -> list[Series]:
    """(N_j + d_j Gamma_{-1}) T, in the coordinates of the germ."""
    if not 0 <= j < G.r:
        raise IndexError(f"variable {j} out of range")
    L = G.connection()[j]
    return L.apply(_const_vec(T, G.r, G.order))


def quantum_action_from_X(G: VHSGerm, frame: AdaptedFrame) -> list[MatSeries]:
    r, D = G.r, G.order
    P = MatSeries.from_matrix(frame.P, r, D)
    Pi = MatSeries.from_matrix(frame.Pinv, r, D)
    return [Pi * L * P for L in G.connection()]


def potential_from_germ(G: VHSGerm, e: Sequence | None = None, frame: AdaptedFrame | None = None,
                        module: FrobeniusModule | None = None) -> Potential:
    """Read the potential off Gamma_{-1} and Gamma_{-2} in the adapted frame of a canonical germ."""
    fr = frame or adapted_frame(G, e)
    M = module or extract_module(G, frame=fr)
    k, r, D, n = G.weight, G.r, G.order, G.n
    if k <= 2:
        if G.Gamma:
            raise CheckError("weights 1 and 2 admit no quantum deformation", weight=k)
        return Potential.zero(k, r, D)
    Gm = gamma_in_frame(G, fr)
    deg = M.degrees()
    Bm = M.B

    def level(X: MatSeries, lv: int) -> MatSeries:
        return X.like({(c, a): s for (c, a), s in X.entries.items() if deg[c] - deg[a] == 2 * lv})

    G1, G2 = level(Gm, 1), level(Gm, 2)

    def pair(vec: list[Series], b: int) -> Series:
        s = Series.zero(r, D)
        for c in range(n):
            if Bm[c][b] and vec[c]:
                s = s + vec[c].scale(Bm[c][b])
        return s

    def column(X: MatSeries, a: int) -> list[Series]:
        return X.column(a)

    if k == 3:
        divs = M.space.divisor_indices()
        rates = [pair(column(G2, a), 0).scale(-1).tau_shift(-1) for a in divs]
        return Potential(3, r, D, scalar=_integrate_theta(rates, r, D))
    linear, quadratic = {}, {}
    for a in range(n):
        if deg[a] == 2 * k - 4:
            s = pair(column(G2, a), 0).scale(-1)
            if s:
                linear[a] = s
    for a in range(n):
        for b in range(a, n):
            if 2 < deg[a] < 2 * k - 4 and 2 < deg[b] < 2 * k - 4 and deg[a] + deg[b] == 2 * k - 2:
                s = pair(column(G1, a), b).scale(Fraction(1, 2))
                if s:
                    quadratic[(a, b)] = s
    return Potential(k, r, D, linear=linear, quadratic=quadratic)


def _integrate_theta(rates: list[Series], r: int, D: int) -> Series:
    """The series phi with theta_j phi = rates[j] and phi(0) = 0."""
    terms = {}
    for j, s in enumerate(rates):
        for key, c in s.terms.items():
            qe = key[1:1 + r]
            if any(key[1 + r:]):
                raise CheckError("log symbols in the potential data")
            if qe[j] == 0:
                raise CheckError("potential data is not integrable", variable=j, exponent=list(qe))
            val = c / qe[j]
            if key in terms and terms[key] != val:
                raise CheckError("potential data is not integrable", variable=j, exponent=list(qe))
            terms[key] = val
    phi = Series(r, D, terms)
    for j, s in enumerate(rates):
        if phi.theta(j) != s:
            raise CheckError("potential data is not integrable", variable=j)
    return phi


@dataclass
class Extraction:
    module: FrobeniusModule
    potential: Potential
    frame: AdaptedFrame
    coordinates: CanonicalCoordinates
    report: Report = field(default_factory=lambda: Report("extraction"))


def extract(G: VHSGerm, e: Sequence | None = None) -> Extraction:
    """Canonical coordinates, adapted frame, module and potential."""
    cc = canonical_coordinates(G, e)
    H = cc.germ
    fr = adapted_frame(H, e)
    M = extract_module(H, frame=fr)
    P = potential_from_germ(H, frame=fr, module=M)
    rep = Report("extraction")
    rep.add("canonical coordinates", is_canonical(H, fr.generator))
    rep.add("module axioms", validate_module(M).ok)
    # the potential must reproduce the product read from dX_{-1}
    from .frobmod import quantum_action, validate_quantum_potential
    rep.extend(validate_quantum_potential(M, P))
    Lx = quantum_action_from_X(H, fr)
    Lp = quantum_action(M, P)
    bad = [j for j in range(H.r) if Lx[j] != Lp[j]]
    rep.add("product from the potential equals the product from dX_{-1}", not bad, failing=bad)
    return Extraction(M, P, fr, cc, rep)


# ----------------------------------------------------------------------
# round trips
# ----------------------------------------------------------------------

def roundtrip_module(M: FrobeniusModule, P: Potential) -> Report:
    """(M, P) -> germ -> (M, P)."""
    from .amodel import build_vhs_germ
    rep = Report("module round trip")
    G = build_vhs_germ(M, P)
    ex = extract(G)
    rep.add("germ is already canonical", ex.coordinates.is_identity())
    rep.add("module recovered", ex.module == M)
    rep.add("potential recovered", ex.potential == P)
    return rep


def roundtrip_germ(G: VHSGerm, e: Sequence | None = None) -> Report:
    """germ -> (M, P) -> germ, compared on the limit data and Gamma_{-1}."""
    from .amodel import build_vhs_germ
    rep = Report("germ round trip")
    ex = extract(G, e)
    H = ex.coordinates.germ
    G2 = build_vhs_germ(ex.module, ex.potential)
    fr = ex.frame
    r, D = H.r, H.order
    P = MatSeries.from_matrix(fr.P, r, D)
    Pi = MatSeries.from_matrix(fr.Pinv, r, D)
    back_F = G2.Finf.__class__(G2.n, G2.Finf.lo, [s.image(fr.P) for s in G2.Finf.pieces])
    back_N = [matmul(matmul(fr.P, N), fr.Pinv) for N in G2.Ns]
    back_G1 = P * G2.gamma_level(-1) * Pi
    rep.add("limit filtration", back_F == H.Finf)
    rep.add("monodromy logarithms", back_N == [list(map(list, N)) for N in H.Ns])
    rep.add("Gamma_{-1}", back_G1 == H.gamma_level(-1))
    rep.add("Gamma", P * G2.Gamma * Pi == H.Gamma)
    return rep


# ----------------------------------------------------------------------
# weight 3 extension data
# ----------------------------------------------------------------------

@dataclass
class ExtensionData:
    coordinates: list          # canonical coordinates as series in the input coordinates
    yukawa: dict               # (a, b, c) over the V_2 indices -> series
    report: Report


def extension_data_weight3(G: VHSGerm, e: Sequence | None = None) -> ExtensionData:
    if G.weight != 3:
        raise CheckError("extension data is defined for weight 3", weight=G.weight)
    cc = canonical_coordinates(G, e)
    H = cc.germ
    e = generator(H, e)
    r, D, n = H.r, H.order, H.n
    fr = adapted_frame(H, e)
    M = extract_module(H, frame=fr)
    rep = Report("weight 3 extension data")
    rep.add("Gamma_{-1} kills the generator", is_canonical(H, e))
    # E_3 in normal form: X_{-1} e = sum ell_j T_j exactly
    xp = x_from_germ(H)
    lb = xp.X.lbound
    ev = [Series.const(x, r, D, lbound=lb) if x else Series.zero(r, D, lb) for x in e]
    coeffs = _series_coords(xp.X_minus1.apply(ev), [matvec(N, e) for N in H.Ns], r, D)
    ok = all(c == Series.ell(j, r, D, lb) for j, c in enumerate(coeffs))
    rep.add("E_3 is sum q_j N_j on the generator", ok)
    # theta(xi_j) e has level -1 part T_j
    thetas, hrep = higgs_field(H)
    rep.extend(hrep, "higgs.")
    bad = []
    for j, th in enumerate(thetas):
        col = H.gb.p_minus1(th).apply(ev)
        want = [Series.const(x, r, D, lbound=lb) if x else Series.zero(r, D, lb) for x in matvec(H.Ns[j], e)]
        if col != want:
            bad.append(j)
    rep.add("theta(xi_j) on the generator is T_j", not bad, failing=bad)
    Ls = quantum_action_from_X(H, fr)
    e0 = _const_vec([ONE] + [ZERO] * (n - 1), r, D)
    divs = M.space.divisor_indices()
    yuk = {}
    for a in range(r):
        for b in range(a, r):
            v = Ls[a].apply(Ls[b].apply(e0))
            for c in range(b, r):
                s = Series.zero(r, D)
                for i in range(n):
                    if M.B[i][divs[c]] and v[i]:
                        s = s + v[i].scale(M.B[i][divs[c]])
                yuk[(a, b, c)] = s
    return ExtensionData(cc.coordinates(), yuk, rep)
