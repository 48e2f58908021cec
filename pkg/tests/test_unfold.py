import random
from fractions import Fraction
from itertools import combinations_with_replacement

import pytest

from hodgefrob.amodel import build_vhs_germ
from hodgefrob.frobmod import (
    FrobeniusModule, GradedSpace, Potential, classical_potential, quantum_action, validate_module,
)
from hodgefrob.generators import random_module, random_potential
from hodgefrob.linfilt import matvec, nullspace, transpose
from hodgefrob.qseries import MatSeries, Series, exp_nilpotent, series_det
from hodgefrob.report import CheckError
from hodgefrob.unfold import (
    FrobeniusAlgebra, ZPoly, algebra_from_module, algebra_from_module_generated, algebra_from_module_low_weight,
    algebra_validate, check_frobenius_manifold, compare_algebras, hat_classical_potential, hm_precondition_check,
    unfolded_product,
)

from conftest import D, quintic_like

ORDER = 4


def _pair(seed, k, r):
    rng = random.Random(seed)
    M = random_module(rng, k, r=r, framed=True)
    return M, random_potential(rng, M, ORDER)


def _e(n, a):
    return tuple(Fraction(int(i == a)) for i in range(n))


# algebras ----------------------------------------------------------------------

def test_quintic_low_weight_algebra(quintic):
    A = algebra_from_module_low_weight(quintic)
    assert A.mul(_e(4, 2), _e(4, 2)) == (0, 0, 0, 0)
    assert A.mul(_e(4, 1), _e(4, 2)) == _e(4, 3)
    assert algebra_validate(A).ok


def test_weight2_product_forced_by_pairing():
    # dims (1,2,1): T_j * T_l = B(T_j, T_l) T_3
    B = [[0, 0, 0, 1], [0, 1, 0, 0], [0, 0, 1, 0], [1, 0, 0, 0]]
    A1 = [[0] * 4 for _ in range(4)]
    A2 = [[0] * 4 for _ in range(4)]
    A1[1][0] = A1[3][1] = 1
    A2[2][0] = A2[3][2] = 1
    M = FrobeniusModule(2, (1, 2, 1), B, [A1, A2])
    assert validate_module(M).ok
    A = algebra_from_module_low_weight(M)
    for a in range(4):
        for b in range(4):
            if a and b and a < 3 and b < 3:
                assert A.table[a][b] == tuple(Fraction(B[a][b]) * x for x in _e(4, 3))
    assert algebra_validate(A).ok


@pytest.mark.parametrize("seed", range(5))
def test_weight5_low_weight_algebra_associative(seed):
    M = random_module(random.Random(seed), 5, r=1 + seed % 2, max_dim=12)
    A = algebra_from_module_low_weight(M)
    rep = algebra_validate(A)
    assert rep.ok and rep.passed("associative")


def test_low_weight_rejects_weight6():
    M = random_module(random.Random(0), 6, r=1)
    with pytest.raises(CheckError):
        algebra_from_module_low_weight(M)


def test_generated_algebra_quintic(quintic):
    A = algebra_from_module_generated(quintic)
    # T_2 = T_1^2 / 5, so T_2 o T_2 = T_1^4 e / 25 = 0
    assert A.mul(_e(4, 2), _e(4, 2)) == (0, 0, 0, 0)
    assert A == algebra_from_module_low_weight(quintic)


def test_generated_needs_generation():
    with pytest.raises(CheckError) as exc:
        algebra_from_module_generated(quintic_like(0))
    assert exc.value.where["deficient_degree"] == 4


@pytest.mark.parametrize("seed", range(4))
def test_both_constructions_agree_on_v2(seed):
    M = random_module(random.Random(seed), 4, r=2)
    A1 = algebra_from_module_low_weight(M)
    A2 = algebra_from_module_generated(M)
    rep = compare_algebras(A1, A2)
    assert rep.passed("agree on V_0 + V_2 times V")
    assert A1.restrict() == M.action == A2.restrict()


def test_generated_algebra_independent_of_preimages():
    rng = random.Random(7)
    M = random_module(rng, 4, r=2)
    base = algebra_from_module_generated(M)
    from hodgefrob.frobmod import is_generated_by_v2
    _, cert = is_generated_by_v2(M)
    e = M.unit()
    deg = M.degrees()
    pre = {a: dict(m) for a, m in cert.items()}
    for a in range(M.n):
        p = deg[a] // 2
        monos = list(combinations_with_replacement(range(M.r), p))
        cols = transpose([list(_apply(M, m, e)) for m in monos])
        for v in nullspace(cols, len(monos)):
            c = Fraction(rng.randint(1, 4))
            for m, x in zip(monos, v):
                if x:
                    pre[a][m] = pre[a].get(m, 0) + c * x
    assert pre != cert
    assert algebra_from_module_generated(M, preimages=pre) == base


def _apply(M, mono, v):
    for j in mono:
        v = matvec(M.action[j], v)
    return tuple(v)


def test_validate_names_bad_pair(quintic):
    A = algebra_from_module_low_weight(quintic)
    table = [list(row) for row in A.table]
    # T_1 o T_2 = 2 T_3 while B(T_1, T_2) = 1
    table[1][2] = table[2][1] = (0, 0, 0, 2)
    rep = algebra_validate(FrobeniusAlgebra(A.space, A.B, table))
    assert rep.passed("commutative") and rep.passed("associative")
    assert (1, 2, 0) in rep.get("pairing invariant").where["failing"]


def test_validate_names_bad_triple():
    M = random_module(random.Random(1), 4, r=1)
    A = algebra_from_module_low_weight(M)
    table = [list(row) for row in A.table]
    # (T_1 o T_1) o T_2 = T_1 o (T_1 o T_2) fails once T_2 o T_2 is rescaled
    table[2][2] = tuple(3 * x for x in table[2][2])
    rep = algebra_validate(FrobeniusAlgebra(A.space, A.B, table))
    assert (1, 1, 2) in rep.get("associative").where["failing"]


def test_hat_potential_quintic(quintic):
    A = algebra_from_module(quintic)
    phi = hat_classical_potential(A)
    assert phi.coeffs == {(0, 0, 3): Fraction(1, 2), (0, 1, 2): Fraction(1), (1, 1, 1): Fraction(5, 6)}
    # on monomials involving a divisor coordinate it agrees with the module potential
    shared = {k: c for k, c in phi.coeffs.items() if 1 in k}
    assert shared == classical_potential(quintic).coeffs


@pytest.mark.parametrize("seed", range(50))
def test_hat_potential_symmetry_iff_invariance(seed):
    rng = random.Random(seed)
    M = random_module(rng, rng.choice([2, 3, 4, 5]), max_dim=10)
    A = algebra_from_module(M)
    phi = hat_classical_potential(A)
    for a in range(A.n):
        for b in range(A.n):
            for c in range(A.n):
                assert phi.third_partial(a, b, A.delta[c]) == A.table[a][b][c]
    # a commutative perturbation: symmetric tensor exactly when the pairing stays invariant
    table = [list(row) for row in A.table]
    a, b = sorted(rng.sample(range(1, A.n), 2)) if A.n > 2 else (1, 1)
    c = rng.randrange(A.n)
    v = list(table[a][b])
    v[c] += 1
    table[a][b] = table[b][a] = tuple(v)
    B = FrobeniusAlgebra(A.space, A.B, table)
    invariant = algebra_validate(B).passed("pairing invariant")
    try:
        hat_classical_potential(B)
        symmetric = True
    except CheckError:
        symmetric = False
    assert symmetric == invariant


def test_hat_potential_unit_only():
    space = GradedSpace(1, (1, 1))
    A = FrobeniusAlgebra(space, [[0, 1], [1, 0]], [[(1, 0), (0, 1)], [(0, 1), (0, 0)]])
    assert algebra_validate(A).ok
    assert hat_classical_potential(A).coeffs == {(0, 0, 1): Fraction(1, 2)}


# unfolded product -------------------------------------------------------------

def test_zero_potential_unfolding_is_constant(quintic):
    A = algebra_from_module(quintic)
    U = unfolded_product(A, Potential.zero(3, 1, D))
    assert U.constant_tensor() == A.table
    for vec in U.entries.values():
        assert all(set(x.terms) <= {()} for x in vec)


def _as_zpoly(s):
    return ZPoly.series(s) if s else ZPoly(s.r, s.order)


def test_weight3_unfolding_on_divisors(quintic, quintic_potential):
    U = unfolded_product(algebra_from_module(quintic), quintic_potential)
    L = quantum_action(quintic, quintic_potential)[0]
    assert U.vector(1, 1) == [_as_zpoly(s) for s in L.column(1)]
    rep = check_frobenius_manifold(U)
    assert rep.ok, rep.render()


def test_weight4_triple_product_reduction():
    M, P = _pair(3, 4, 2)
    assert P.linear
    U = unfolded_product(algebra_from_module_low_weight(M), P)
    Ls = quantum_action(M, P)
    div = M.space.divisor_indices()
    top = M.require_delta()[0]
    r = M.r
    from hodgefrob.unfold import _apply_op
    for a in div:
        for b in div:
            for c in div:
                lhs = _apply_op(U.operator(a), U.vector(b, c), r, ORDER)
                inner = Ls[b - 1].column(c)
                qq = Ls[a - 1].apply(inner)
                want = [_as_zpoly(s) for s in qq]
                # the z-linear term sum_{a'} z_{a'} d_b d_c d_a phi^{a'} on T_delta(0)
                extra = ZPoly(r, ORDER)
                for ap, phi in P.linear.items():
                    s = phi.theta(b - 1).theta(c - 1).theta(a - 1).tau_shift(3)
                    extra = extra + ZPoly.series(s, (ap,))
                want[top] = want[top] + extra
                assert lhs == want, (a, b, c)


def test_unfolded_product_restricts_to_quantum_action():
    # seed 6 carries an off-diagonal quadratic entry (3, 4)
    M, P = _pair(6, 5, 2)
    assert (3, 4) in P.quadratic
    U = unfolded_product(algebra_from_module(M), P)
    deg = M.degrees()
    L = quantum_action(M, P)
    for jj in range(M.r):
        j = M.dims[0] + jj
        for a in range(M.n):
            for c in range(M.n):
                if deg[c] == deg[a] + 2:
                    got = U.entries[(j, a)][c].terms.get((), Series.zero(M.r, P.order))
                    want = L[jj].entries.get((c, a), Series.zero(M.r, P.order))
                    assert got == want, (j, a, c)


@pytest.mark.parametrize("seed,k,r", [(0, 3, 2), (3, 4, 2), (1, 4, 1), (4, 5, 1), (6, 5, 2)])
def test_frobenius_manifold_axioms(seed, k, r):
    M, P = _pair(seed, k, r)
    U = unfolded_product(algebra_from_module(M), P)
    rep = check_frobenius_manifold(U)
    assert rep.ok, rep.render()


def test_broken_weight4_fails_associativity():
    M, P = _pair(3, 4, 2)
    a = min(P.linear)
    lin = dict(P.linear)
    lin[a] = lin[a] + Series.q(0, 2, ORDER) * Series.q(1, 2, ORDER)
    U = unfolded_product(algebra_from_module(M), Potential(4, 2, ORDER, linear=lin))
    rep = check_frobenius_manifold(U)
    assert rep.passed("metric compatibility") and rep.passed("potentiality") and rep.passed("commutative")
    chk = rep.get("associative")
    assert not chk.ok
    first = chk.where["failing"][0]
    assert len(first["triple"]) == 3 and first["order"] == 2


def test_restriction_recovers_module(quintic):
    for A in (algebra_from_module_low_weight(quintic), algebra_from_module_generated(quintic)):
        assert A.restrict() == quintic.action


# unfolding preconditions ------------------------------------------------------

def test_hm_quintic(quintic, quintic_potential):
    rep = hm_precondition_check(build_vhs_germ(quintic, quintic_potential))
    assert rep.ok, rep.render()
    assert rep.get("monodromy logarithms generate from e").where["span"] == 4


def test_hm_kappa_zero_without_quantum_part():
    rep = hm_precondition_check(build_vhs_germ(quintic_like(0), Potential.zero(3, 1, D)))
    assert not rep.passed("monodromy logarithms generate from e")
    chk = rep.get("Higgs field generates from e for q near 0")
    assert not chk.ok and chk.where["deficient_degree"] == 4


def test_hm_kappa_zero_with_quantum_part():
    rep = hm_precondition_check(build_vhs_germ(quintic_like(0), Potential(3, 1, D, Series.q(0, 1, D))))
    assert not rep.passed("monodromy logarithms generate from e")
    chk = rep.get("Higgs field generates from e for q near 0")
    assert chk.ok and chk.where["span_order"] == 1
    assert any("q=0" in n for n in rep.notes)


@pytest.mark.parametrize("seed,k,r", [(0, 3, 2), (3, 4, 2), (4, 5, 1)])
def test_hm_random(seed, k, r):
    M, P = _pair(seed, k, r)
    assert hm_precondition_check(build_vhs_germ(M, P)).ok


@pytest.mark.parametrize("seed", range(4))
def test_generation_determinant_invariant_under_conjugation(seed):
    M, P = _pair(seed, 3 + seed % 2, 2)
    G = build_vhs_germ(M, P)
    rng = random.Random(seed)
    n, r = G.n, G.r
    Y = MatSeries.zero(n, r, ORDER)
    for rs in [(-1, -1), (-2, -2)]:
        for X in G.gb.basis(rs):
            c = rng.randint(-2, 2)
            if c:
                mono = Series.monomial(r, ORDER, q=[rng.randint(0, 1), 1]).scale(c)
                Y = Y + MatSeries.from_matrix(X, r, ORDER).map(lambda s, m=mono: s * m)
    U, Ui = exp_nilpotent(Y), exp_nilpotent(-Y)
    L = G.connection()
    Lc = [U * Lj * Ui for Lj in L]
    e = [Series.const(x, r, ORDER) if x else Series.zero(r, ORDER) for x in G.extra["unit"]]
    ec = U.apply(e)

    def span_det(ops, v0):
        vecs = [v0]
        frontier = [v0]
        for _ in range(G.weight):
            frontier = [op.apply(v) for v in frontier for op in ops]
            vecs += frontier
        # first n vectors in a fixed order whose constant parts are independent
        from hodgefrob.linfilt import Subspace
        chosen, acc = [], Subspace.zero(n)
        for v in vecs:
            c0 = [s.q_part((0,) * r).coeff() for s in v]
            nxt = acc + Subspace.span(n, [c0])
            if nxt.dim > acc.dim:
                chosen.append(v)
                acc = nxt
        return [v for v in chosen], vecs

    chosen, _ = span_det(L, e)
    assert len(chosen) == n
    idx = []
    _, all_vecs = span_det(L, e)
    for v in chosen:
        idx.append(next(i for i, w in enumerate(all_vecs) if w == v))
    _, all_c = span_det(Lc, ec)
    d0 = series_det([[all_vecs[i][row] for i in idx] for row in range(n)])
    d1 = series_det([[all_c[i][row] for i in idx] for row in range(n)])
    assert d0 == d1 and d0.is_unit()
