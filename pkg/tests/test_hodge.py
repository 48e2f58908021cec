import random
from fractions import Fraction

import pytest

from hodgefrob.amodel import grading_weight_filtration, hodge_filtration
from hodgefrob.frobmod import polarizes, q_form
from hodgefrob.generators import jordan_nilpotent, random_filtration_mhs, random_real_unipotent, random_split_mhs
from hodgefrob.hodge import (
    MHS, Bigrading, barphi, barphi_direct, check_morphism_type, check_polarization, check_pure, deligne_bigrading,
    is_hodge_tate, is_split_real, relative_weight_filtration, verify_bigrading, verify_relative_weight_filtration,
    verify_weight_filtration, weight_filtration, weight_filtration_cone,
)
from hodgefrob.linfilt import DecFiltration, IncFiltration, Subspace, convolve, dual, is_opposite, mat_scale
from hodgefrob.report import CheckError
from hodgefrob.scalars import I as IMAG

from conftest import quintic_like


def _weight_one(v):
    return DecFiltration.from_map(2, {0: Subspace.full(2), 1: Subspace.span(2, [v]), 2: Subspace.zero(2)})


def test_check_pure_examples():
    assert check_pure(DecFiltration.from_map(2, {0: Subspace.full(2), 1: Subspace.zero(2)}), 0).ok
    assert check_pure(_weight_one([1, IMAG]), 1).ok
    assert not check_pure(_weight_one([1, 0]), 1).ok


def test_check_polarization_weight_one():
    Q = [[0, 1], [-1, 0]]
    assert check_polarization(_weight_one([1, IMAG]), 1, Q).ok
    rep = check_polarization(_weight_one([1, -IMAG]), 1, Q)
    assert not rep.ok


def test_check_polarization_orthogonality_failure():
    # k = 2, F^1 = F^2-partner must be Q-isotropic; a symmetric form with Q(v, v) != 0 breaks it
    F = DecFiltration.from_map(3, {0: Subspace.full(3), 1: Subspace.span(3, [[1, 0, 0], [0, 1, 0]]),
                                   2: Subspace.span(3, [[1, IMAG, 0]]), 3: Subspace.zero(3)})
    Q = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
    rep = check_polarization(F, 2, Q)
    assert not rep.ok
    assert any("orthogonal" in c.name or "isotrop" in c.name for c in rep.failures())


def _module_mhs(M):
    return MHS(hodge_filtration(M), grading_weight_filtration(M))


def test_hodge_tate_bigrading_of_a_module():
    M = quintic_like(5)
    mhs = _module_mhs(M)
    I = deligne_bigrading(mhs)
    k = M.weight
    for p in range(k + 1):
        assert I[(p, p)] == M.space.block(2 * (k - p))
    assert is_hodge_tate(I) and is_split_real(I)
    assert verify_bigrading(I, mhs).ok
    # lower index sums are the sums of I^{a,a} with a <= p
    Phi = barphi(mhs)
    for p in range(-1, k + 2):
        assert Phi[p] == I.span(lambda a, b, p=p: a <= p)


def test_pure_structure_bigrading():
    F = _weight_one([1, IMAG])
    W = IncFiltration.from_map(2, {0: Subspace.zero(2), 1: Subspace.full(2)})
    mhs = MHS(F, W)
    I = deligne_bigrading(mhs)
    assert set(I.pieces) == {(1, 0), (0, 1)}
    assert I[(1, 0)] == F[1] and I[(0, 1)] == F[1].conj()
    assert verify_bigrading(I, mhs).ok
    assert not is_hodge_tate(I)
    # pure: barphi_q is conj(F)^{k-q}
    Phi = barphi(mhs)
    for q in range(-1, 3):
        assert Phi[q] == F.conj()[1 - q]


def test_non_mhs_is_rejected_with_location():
    F = _weight_one([1, 0])
    W = IncFiltration.from_map(2, {0: Subspace.zero(2), 1: Subspace.full(2)})
    assert not MHS(F, W).validate().ok
    with pytest.raises(CheckError) as exc:
        deligne_bigrading(MHS(F, W))
    assert exc.value.where


def test_random_split_mhs_round_trip():
    rng = random.Random(1)
    for _ in range(100):
        I, mhs = random_split_mhs(rng, rng.randint(1, 6))
        J = deligne_bigrading(mhs)
        assert J.pieces == I.pieces
        assert verify_bigrading(J, mhs).ok
        assert barphi(mhs) == barphi_direct(mhs)
        assert barphi(mhs) == convolve(dual(mhs.F.conj()), mhs.W)


def test_conjugated_mhs_keeps_direct_sum_and_filtrations():
    rng = random.Random(2)
    for _ in range(30):
        I, _ = random_split_mhs(rng, rng.randint(2, 6))
        g = random_real_unipotent(rng, I.n)
        mhs = random_filtration_mhs(I, g)
        J = deligne_bigrading(mhs)
        rep = verify_bigrading(J, mhs)
        for name in ("direct sum", "hodge filtration", "weight filtration", "lower-index sums"):
            assert rep.passed(name), name
        for p in range(mhs.F.lo - 1, mhs.F.hi + 1):
            assert is_opposite(mhs.F, barphi(mhs)).ok


def test_split_real_needs_conjugation_stable_pieces():
    n = 2
    I = Bigrading(n, {(1, 1): Subspace.span(n, [[1, IMAG]]), (0, 0): Subspace.span(n, [[0, 1]])})
    assert is_hodge_tate(I)
    assert not is_split_real(I)


def test_morphism_type():
    n = 2
    I = Bigrading(n, {(1, 1): Subspace.span(n, [[1, 0]]), (0, 1): Subspace.span(n, [[0, 1]])})
    N = [[0, 0], [1, 0]]
    assert not check_morphism_type(N, I, (-1, -1))
    assert check_morphism_type(N, I, (-1, 0))
    Z = [[0, 0], [0, 0]]
    assert all(check_morphism_type(Z, I, ab) for ab in [(0, 0), (-1, -1), (2, -3)])
    M = quintic_like(5)
    J = deligne_bigrading(_module_mhs(M))
    assert check_morphism_type(M.action[0], J, (-1, -1))


def test_weight_filtration_of_zero():
    W = weight_filtration([[0, 0], [0, 0]], 3)
    assert W[2] == Subspace.zero(2) and W[3] == Subspace.full(2)


def test_weight_filtration_jordan_block_of_size_two():
    N = [[0, 0], [1, 0]]
    W = weight_filtration(N, 0)
    assert W[-2] == Subspace.zero(2)
    assert W[-1] == Subspace.span(2, [[0, 1]]) == W[0]
    assert W[1] == Subspace.full(2)
    assert verify_weight_filtration(N, W, 0).ok


def test_weight_filtration_blocks_three_and_one():
    N = jordan_nilpotent(random.Random(0), 4, [3, 1], conjugate=False)
    W = weight_filtration(N, 0)
    gr = [W[j].dim - W[j - 1].dim for j in range(-2, 3)]
    assert gr == [1, 0, 2, 0, 1]


def _perturbations(W: IncFiltration):
    """Filtrations differing from W at exactly one index, still nested."""
    for j in range(W.lo, W.hi):
        for cand in (W[j - 1], W[j + 1]):
            if cand != W[j]:
                m = W.as_map()
                m[j] = cand
                lo, hi = min(m), max(m)
                yield IncFiltration(W.n, lo, [m[i] for i in range(lo, hi + 1)])


def test_weight_filtration_axioms_and_uniqueness():
    rng = random.Random(7)
    for seed in range(100):
        n = rng.randint(1, 10)
        N = jordan_nilpotent(rng, n)
        c = rng.randint(-2, 3)
        W = weight_filtration(N, c)
        assert verify_weight_filtration(N, W, c).ok
        if n <= 6:
            for W2 in _perturbations(W):
                assert not verify_weight_filtration(N, W2, c).ok


def test_cone_single_ray_and_frobenius_pair():
    N = jordan_nilpotent(random.Random(3), 5, [3, 2])
    W1 = weight_filtration(N, 0)
    W, rep = weight_filtration_cone([N], 0)
    assert W == W1 and rep.ok
    W, rep = weight_filtration_cone([N, mat_scale(2, N)], 0)
    assert rep.ok and W == W1
    from hodgefrob.generators import random_module
    M = random_module(random.Random(5), 3, r=2, framed=True)
    W, rep = weight_filtration_cone(M.action, 3)
    assert rep.ok


def test_cone_rejects_non_commuting():
    with pytest.raises(CheckError):
        weight_filtration_cone([[[0, 1], [0, 0]], [[0, 0], [1, 0]]], 0)


def test_relative_weight_filtration_cases():
    rng = random.Random(4)
    N = jordan_nilpotent(rng, 4, [2, 2])
    pure = IncFiltration.from_map(4, {1: Subspace.zero(4), 2: Subspace.full(4)})
    R = relative_weight_filtration(N, pure)
    assert R == weight_filtration(N, 2)
    assert verify_relative_weight_filtration(N, pure, R).ok
    Z = [[0] * 4 for _ in range(4)]
    W = IncFiltration.from_map(4, {0: Subspace.span(4, [[1, 0, 0, 0]]), 1: Subspace.span(4, [[1, 0, 0, 0]]),
                                   2: Subspace.full(4)})
    assert relative_weight_filtration(Z, W) == W


def test_relative_weight_filtration_of_module_germ_is_psi():
    M = quintic_like(5)
    k = M.weight
    N = M.action[0]
    pure = IncFiltration.from_map(M.n, {k - 1: Subspace.zero(M.n), k: Subspace.full(M.n)})
    R = relative_weight_filtration(N, pure)
    for p in range(-1, k + 2):
        psi_p = Subspace.zero(M.n)
        for a in range(0, p + 1):
            if a <= k:
                psi_p = psi_p + M.space.block(2 * (k - a))
        assert R[2 * p] == psi_p


def test_polarized_by_examples():
    M = quintic_like(5)
    rep = polarizes(M, [1])
    assert rep.passed("hard Lefschetz")
    assert rep.ok
    assert not polarizes(M, [0]).passed("hard Lefschetz")
    for lam in (Fraction(1, 3), Fraction(2), Fraction(7, 2)):
        assert polarizes(M, [lam]).ok == rep.ok
    Mneg = quintic_like(-5)
    assert polarizes(Mneg, [1]).passed("hard Lefschetz")
    assert q_form(M)[0][3] == -1
