"""The A-model variation attached to a deformed Frobenius module."""

from __future__ import annotations

from dataclasses import dataclass

from .degeneration import VHSGerm, gamma_from_gamma_minus1, horizontality_check
from .frobmod import FrobeniusModule, Potential, check_framing, q_form, quantum_action, validate_module, validate_quantum_potential
from .hodge import is_hodge_tate, is_split_real, weight_filtration
from .linfilt import DecFiltration, IncFiltration, Subspace, matvec, sum_all
from .qseries import MatSeries
from .report import CheckError, Report


@dataclass
class ConnectionMatrix:
    """nabla_{d/dz_j} = d/dz_j + L_j(q) in the constant adapted frame.

    In the q_j direction this is d/dq_j + L_j / (tau q_j), so the residue at
    q_j = 0 is L_j(0) / tau.
    """

    L: list

    @property
    def r(self) -> int:
        return len(self.L)

    def residue(self, j: int) -> MatSeries:
        L0 = self.L[j].q_part((0,) * self.L[j].r)
        return L0.map(lambda s: s.tau_shift(-1))


def dubrovin_connection(M: FrobeniusModule, P: Potential) -> ConnectionMatrix:
    rep = validate_quantum_potential(M, P)
    if not rep.ok:
        raise CheckError("invalid potential", failures=[c.name for c in rep.failures()])
    return ConnectionMatrix(quantum_action(M, P))


def monodromy_logs(M: FrobeniusModule):
    return [A for A in M.action]


def residue_check(M: FrobeniusModule, C: ConnectionMatrix) -> Report:
    rep = Report("residues")
    bad = []
    for j, A in enumerate(M.action):
        R = C.residue(j)
        want = MatSeries.from_matrix(A, R.r, R.order, tau=-1)
        if R != want:
            bad.append(j)
    rep.add("residue is the classical action over tau", not bad, failing=bad)
    return rep


def flatness_check(C: ConnectionMatrix) -> Report:
    rep = Report("flatness")
    bad = []
    for j in range(C.r):
        for k in range(j + 1, C.r):
            curv = C.L[k].derive_z(j) - C.L[j].derive_z(k) + C.L[j].commutator(C.L[k])
            if curv:
                bad.append({"pair": (j, k), "order": curv.first_nonzero_order()})
    rep.add("curvature vanishes", not bad, failing=bad)
    return rep


def transversality_check(C: ConnectionMatrix, F: DecFiltration) -> Report:
    rep = Report("Griffiths transversality")
    bad = []
    for j, L in enumerate(C.L):
        for p in range(F.lo, F.hi + 1):
            src, tgt = F[p], F[p - 1]
            ok = True
            for v in src.rows:
                for coeff in _coefficient_matrices(L):
                    if not tgt.contains(matvec(coeff, v)):
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                bad.append({"j": j, "p": p})
    rep.add("F^p maps into F^(p-1)", not bad, failing=bad)
    return rep


def _coefficient_matrices(L: MatSeries) -> list:
    keys = set()
    for s in L.entries.values():
        keys |= set(s.terms)
    out = []
    for key in sorted(keys):
        M = [[s.terms.get(key, 0) if (s := L.entries.get((i, j))) is not None else 0 for j in range(L.n)]
             for i in range(L.n)]
        out.append(M)
    return out


def pairing_flatness_check(M: FrobeniusModule, C: ConnectionMatrix) -> Report:
    rep = Report("flat pairing")
    r = C.L[0].r if C.L else 0
    order = C.L[0].order if C.L else 0
    Q = MatSeries.from_matrix(q_form(M), r, order)
    bad = [j for j, L in enumerate(C.L) if Q * L + L.transpose() * Q]
    rep.add("connection preserves Q", not bad, failing=bad)
    return rep


def hodge_filtration(M: FrobeniusModule) -> DecFiltration:
    """F^p = sum of V_{2(k-a)} over a >= p."""
    k = M.weight
    pieces = {p: sum_all(M.n, [M.space.block(2 * (k - a)) for a in range(p, k + 1)]) for p in range(0, k + 2)}
    return DecFiltration.from_map(M.n, pieces)


def grading_weight_filtration(M: FrobeniusModule) -> IncFiltration:
    """W_{2p} = W_{2p+1} = sum of V_{2(k-a)} over a <= p."""
    k = M.weight
    pieces = {w: sum_all(M.n, [M.space.block(2 * (k - a)) for a in range(0, w // 2 + 1)])
              for w in range(-1, 2 * k + 1)}
    return IncFiltration.from_map(M.n, pieces)


def gamma_minus1_from_potential(M: FrobeniusModule, P: Potential) -> MatSeries:
    """Gamma_{-1}(T_a) = sum over deg c = deg a + 2 of d_a d_{delta(c)} phi_hbar T_c."""
    delta = M.require_delta()
    n, r, D = M.n, M.r, P.order
    deg = M.degrees()
    ent = {}
    if P.is_zero():
        return MatSeries.zero(n, r, D)
    for a in range(n):
        for c in range(n):
            if deg[c] == deg[a] + 2:
                s = P.derivative(M, (a, delta[c]))
                if s:
                    ent[(c, a)] = s
    return MatSeries(n, r, D, ent)


def build_vhs_germ(M: FrobeniusModule, P: Potential) -> VHSGerm:
    rep = validate_module(M)
    rep.extend(validate_quantum_potential(M, P))
    if not rep.ok:
        raise CheckError("invalid module or potential", failures=[c.name for c in rep.failures()])
    F = hodge_filtration(M)
    Ns = monodromy_logs(M)
    Q = q_form(M)
    W = grading_weight_filtration(M)
    G0 = VHSGerm(M.weight, F, Ns, Q, MatSeries.zero(M.n, M.r, P.order), W)
    Gm1 = gamma_minus1_from_potential(M, P)
    Gamma = gamma_from_gamma_minus1(F, Ns, Gm1, G0.gb)
    G = VHSGerm(M.weight, F, Ns, Q, Gamma, W)
    G.extra["unit"] = tuple(M.unit())
    return G


def maximal_unipotency_check(G: VHSGerm) -> Report:
    rep = Report("maximally unipotent boundary point")
    k, r = G.weight, len(G.Ns)
    mono = weight_filtration(G.N_sum(), k)
    rep.add("limit weight filtration is W(sum N_j)", G.weight_filtration == mono)
    try:
        I = G.bigrading
    except CheckError as exc:
        rep.add("limiting mixed Hodge structure", False, reason=str(exc))
        return rep
    rep.add("dim I^{k,k} = 1", I[(k, k)].dim == 1, dim=I[(k, k)].dim)
    rep.add("dim I^{k-1,k-1} = r", I[(k - 1, k - 1)].dim == r, dim=I[(k - 1, k - 1)].dim, r=r)
    rep.add("I^{k,k-1} and I^{k-2,k} vanish", I[(k, k - 1)].dim == 0 and I[(k - 2, k)].dim == 0)
    neg = [pq for pq in I.pieces if pq[0] < 0 or pq[1] < 0]
    rep.add("no negative indices", not neg, failing=neg)
    top = I[(k, k)]
    span = Subspace.span(G.n, [matvec(N, v) for N in G.Ns for v in top.rows])
    rep.add("monodromy images span I^{k-1,k-1}", span == I[(k - 1, k - 1)], span_dim=span.dim)
    return rep


def amodel_report(M: FrobeniusModule, P: Potential) -> tuple[VHSGerm, Report]:
    """The full verification battery for the A-model variation."""
    C = dubrovin_connection(M, P)
    G = build_vhs_germ(M, P)
    rep = Report("A-model variation")
    rep.extend(check_framing(M), "framing.")
    rep.extend(flatness_check(C), "flatness.")
    rep.extend(transversality_check(C, G.Finf), "transversality.")
    rep.extend(maximal_unipotency_check(G), "maximal unipotency.")
    rep.extend(residue_check(M, C), "residue.")
    rep.extend(pairing_flatness_check(M, C), "pairing.")
    rep.add("limit is Hodge-Tate", is_hodge_tate(G.bigrading))
    rep.add("limit is split over the reals", is_split_real(G.bigrading))
    rep.extend(horizontality_check(G), "horizontality.")
    return G, rep
