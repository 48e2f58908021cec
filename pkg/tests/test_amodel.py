import random

import pytest

from hodgefrob.amodel import (
    ConnectionMatrix, amodel_report, build_vhs_germ, dubrovin_connection, flatness_check,
    grading_weight_filtration, hodge_filtration, maximal_unipotency_check, monodromy_logs, pairing_flatness_check,
    residue_check, transversality_check,
)
from hodgefrob.degeneration import VHSGerm, horizontality_check
from hodgefrob.frobmod import FrobeniusModule, Potential, q_form, quantum_action, validate_quantum_potential
from hodgefrob.generators import add_isolated_pairs, random_module, random_potential
from hodgefrob.linfilt import Subspace, matvec
from hodgefrob.qseries import MatSeries, Series
from hodgefrob.report import CheckError
from hodgefrob.vhs2frob import potential_from_germ

from conftest import D

ORDER = 4


def _valid(seed, k, r):
    rng = random.Random(seed)
    M = random_module(rng, k, r=r, framed=True)
    return M, random_potential(rng, M, ORDER)


def _broken(seed=3):
    M, P = _valid(seed, 4, 2)
    a = min(P.linear)
    lin = dict(P.linear)
    lin[a] = lin[a] + Series.q(0, 2, ORDER) * Series.q(1, 2, ORDER)
    return M, Potential(4, 2, ORDER, linear=lin)


def test_zero_potential_connection_is_classical(quintic):
    C = dubrovin_connection(quintic, Potential.zero(3, 1, D))
    assert C.L[0] == MatSeries.from_matrix(quintic.action[0], 1, D)
    assert monodromy_logs(quintic) == quintic.action


def test_quintic_connection_entry(quintic, quintic_potential):
    C = dubrovin_connection(quintic, quintic_potential)
    assert C.L[0][(2, 1)] == Series.const(5, 1, D) + Series.monomial(1, D, q=(1,), tau=3)


def test_dubrovin_connection_rejects_invalid_potential():
    M, P = _broken()
    with pytest.raises(CheckError):
        dubrovin_connection(M, P)


@pytest.mark.parametrize("seed,k,r", [(0, 3, 1), (1, 3, 2), (2, 4, 2), (3, 5, 1), (4, 4, 1)])
def test_residue_is_classical_action_over_tau(seed, k, r):
    M, P = _valid(seed, k, r)
    C = dubrovin_connection(M, P)
    assert residue_check(M, C).ok
    for j, A in enumerate(M.action):
        # tau * residue = classical action
        assert C.residue(j).map(lambda s: s.tau_shift(1)) == MatSeries.from_matrix(A, r, ORDER)


def test_single_variable_is_flat(quintic, quintic_potential):
    assert flatness_check(dubrovin_connection(quintic, quintic_potential)).ok


@pytest.mark.parametrize("seed", [0, 2, 4, 6])
def test_two_variables_flat(seed):
    M, P = _valid(seed, 3 + seed % 3, 2)
    assert flatness_check(dubrovin_connection(M, P)).ok


def test_perturbed_connection_reports_order():
    M, P = _valid(2, 4, 2)
    C = dubrovin_connection(M, P)
    L = list(C.L)
    c, a = next((c, a) for c in range(M.n) for a in range(M.n) if M.degrees()[c] == M.degrees()[a] + 2 and a > 0)
    bump = MatSeries(M.n, 2, ORDER, {(c, a): Series.monomial(2, ORDER, q=(1, 2))})
    L[1] = L[1] + bump
    rep = flatness_check(ConnectionMatrix(L))
    assert not rep.ok
    assert rep.failures()[0].where["failing"][0]["order"] == 3


@pytest.mark.parametrize("seed", range(6))
def test_flatness_iff_commutativity(seed):
    # randomized weight-4 instances, valid and perturbed
    M, P = _valid(seed, 4, 2)
    for Q in (P, _perturb(P, seed)):
        C = ConnectionMatrix(quantum_action(M, Q))
        assert flatness_check(C).ok == validate_quantum_potential(M, Q).passed("quantum commutativity")


def _perturb(P, seed):
    rng = random.Random(seed)
    lin = dict(P.linear)
    a = rng.choice(sorted(lin)) if lin else None
    if a is None:
        return P
    lin[a] = lin[a] + Series.monomial(2, ORDER, q=(rng.randint(0, 1), 1)).scale(rng.randint(1, 3))
    return Potential(4, 2, ORDER, linear=lin, quadratic=P.quadratic)


def test_broken_weight4_fails_both():
    M, P = _broken()
    C = ConnectionMatrix(quantum_action(M, P))
    assert not flatness_check(C).ok
    assert not validate_quantum_potential(M, P).ok


def test_transversality(quintic, quintic_potential):
    F = hodge_filtration(quintic)
    C0 = ConnectionMatrix([MatSeries.from_matrix(quintic.action[0], 1, D)])
    assert transversality_check(C0, F).ok
    C = dubrovin_connection(quintic, quintic_potential)
    assert transversality_check(C, F).ok
    # shift is exactly one: T1 does not preserve F^p in general
    assert not all(F[2].contains(matvec(quintic.action[0], v)) for v in F[2].rows)


def test_transversality_violation_names_p(quintic, quintic_potential):
    F = hodge_filtration(quintic)
    C = dubrovin_connection(quintic, quintic_potential)
    # a degree +4 term T_0 -> T_2 lands in F^1 from F^3
    L = C.L[0] + MatSeries(4, 1, D, {(2, 0): Series.q(0, 1, D)})
    rep = transversality_check(ConnectionMatrix([L]), F)
    assert not rep.ok
    assert rep.failures()[0].where["failing"] == [{"j": 0, "p": 3}]


@pytest.mark.parametrize("seed,k,r", [(0, 3, 2), (2, 4, 2), (3, 5, 1)])
def test_pairing_is_flat(seed, k, r):
    M, P = _valid(seed, k, r)
    C = dubrovin_connection(M, P)
    assert pairing_flatness_check(M, C).ok
    Q = MatSeries.from_matrix(q_form(M), r, ORDER)
    for L in C.L:
        assert not (Q * L + L.transpose() * Q)


def test_hodge_and_weight_filtrations(quintic):
    F = hodge_filtration(quintic)
    W = grading_weight_filtration(quintic)
    e = lambda a: [1 if i == a else 0 for i in range(4)]
    assert F[3] == Subspace.span(4, [e(0)])
    assert F[1] == Subspace.span(4, [e(0), e(1), e(2)])
    assert W[0] == W[1] == Subspace.span(4, [e(3)])
    assert W[4] == Subspace.span(4, [e(3), e(2), e(1)])


def test_mum_passes_for_framed_modules(quintic, quintic_potential):
    assert maximal_unipotency_check(build_vhs_germ(quintic, quintic_potential)).ok
    for seed, k, r in [(1, 3, 2), (2, 4, 2), (3, 5, 1)]:
        M, P = _valid(seed, k, r)
        assert maximal_unipotency_check(build_vhs_germ(M, P)).ok


def test_mum_fails_for_repeated_monodromy():
    M, P = _valid(1, 3, 2)
    G = build_vhs_germ(M, P)
    H = VHSGerm(G.weight, G.Finf, [G.Ns[0], G.Ns[0]], G.Q, G.Gamma, G.W)
    rep = maximal_unipotency_check(H)
    assert not rep.passed("monodromy images span I^{k-1,k-1}")


def test_mum_fails_for_two_dimensional_v0():
    # dims (2,1,1,2); the extra degree-0 vector pairs with the extra degree-6 vector
    n = 6
    B = [[0] * n for _ in range(n)]
    for a, b in [(0, 5), (1, 4), (2, 3)]:
        B[a][b] = B[b][a] = 1
    A = [[0] * n for _ in range(n)]
    A[2][0] = A[3][2] = A[5][3] = 1
    M = FrobeniusModule(3, (2, 1, 1, 2), B, [A])
    G = VHSGerm(3, hodge_filtration(M), [A], q_form(M), MatSeries.zero(n, 1, 2), grading_weight_filtration(M))
    rep = maximal_unipotency_check(G)
    chk = rep.get("dim I^{k,k} = 1")
    assert not chk.ok and chk.where["dim"] == 2


def test_build_germ_zero_potential_is_nilpotent_orbit(quintic):
    G = build_vhs_germ(quintic, Potential.zero(3, 1, D))
    assert not G.Gamma
    assert G.Ns == quintic.action


def test_build_germ_quintic_round_trip(quintic, quintic_potential):
    G = build_vhs_germ(quintic, quintic_potential)
    assert G.gamma_level(-1) and horizontality_check(G).ok
    assert potential_from_germ(G) == quintic_potential


@pytest.mark.parametrize("seed", range(3))
def test_weight4_germ_battery(seed):
    M, P = _valid(seed, 4, None)
    G, rep = amodel_report(M, P)
    assert rep.ok, rep.render()
    assert maximal_unipotency_check(G).ok and horizontality_check(G).ok


def test_amodel_report_flags_unframed_module():
    # an isolated pair in degrees 4 and 6 is killed by T_1, so T_1 cannot map V_4 onto V_6
    rng = random.Random(0)
    M = add_isolated_pairs(random_module(rng, 5, r=1), [2])
    _, rep = amodel_report(M, Potential.zero(5, 1, ORDER))
    assert not rep.ok
    assert any(c.name.startswith("framing.") for c in rep.failures())
