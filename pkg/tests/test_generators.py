import random
from fractions import Fraction
from math import comb

import pytest
import sympy as sp
from hypothesis import given, strategies as st

from hodgefrob.frobmod import check_framing, validate_module, validate_quantum_potential
from hodgefrob.generators import (
    add_isolated_pairs, apply_operator, gorenstein_module, jordan_nilpotent, monomials_of_degree,
    random_module, random_potential, random_split_mhs, tensor_module,
)
from hodgefrob.hodge import deligne_bigrading, is_split_real, nilpotency_index
from hodgefrob.linfilt import matmul, matvec, rank
from hodgefrob.report import CheckError

from oracles import qs


@given(st.integers(1, 4), st.integers(0, 6))
def test_monomial_count(r, d):
    mons = monomials_of_degree(r, d)
    assert len(mons) == comb(d + r - 1, r - 1) == len(set(mons))
    assert all(sum(m) == d for m in mons)
    assert mons == sorted(mons, reverse=True)


@given(st.dictionaries(st.tuples(st.integers(0, 3), st.integers(0, 3)), st.integers(-4, 4), max_size=6),
       st.tuples(st.integers(0, 2), st.integers(0, 2)))
def test_apply_operator_matches_sympy(F, alpha):
    x, y = qs(2)
    poly = sum((c * x ** a * y ** b for (a, b), c in F.items()), sp.Integer(0))
    want = sp.expand(sp.diff(poly, x, alpha[0], y, alpha[1]))
    got = apply_operator({k: Fraction(c) for k, c in F.items() if c}, alpha)
    assert sp.expand(sum((c * x ** a * y ** b for (a, b), c in got.items()), sp.Integer(0))) == want


def _triple(M, i, j, l):
    e = M.unit()
    w = matvec(M.action[i], matvec(M.action[j], e))
    top = M.dims[0] + l
    return sum(w[a] * M.B[a][top] for a in range(M.n))


def test_rank_one_cubic():
    M = gorenstein_module({(3,): Fraction(5)}, 1, 3)
    assert M.dims == (1, 1, 1, 1) and validate_module(M).ok
    # the triple product is the third derivative of the form
    assert _triple(M, 0, 0, 0) == 30


@given(st.lists(st.integers(-3, 3), min_size=4, max_size=4))
def test_weight3_triples_are_third_derivatives(cs):
    # a binary cubic; only nondegenerate ones give r = 2
    F = {m: Fraction(c) for m, c in zip(monomials_of_degree(2, 3), cs) if c}
    try:
        M = gorenstein_module(F, 2, 3)
    except CheckError:
        return
    if M.r != 2:
        return
    assert validate_module(M).ok
    x, y = qs(2)
    poly = sum(c * x ** a * y ** b for (a, b), c in F.items())
    var = [x, y]
    for i in range(2):
        for j in range(2):
            for l in range(2):
                assert _triple(M, i, j, l) == sp.diff(poly, var[i], var[j], var[l])


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5, 6])
def test_random_modules_are_valid(k):
    rng = random.Random(k)
    for _ in range(4):
        M = random_module(rng, k)
        assert M.weight == k and validate_module(M).ok
        assert M.dims == tuple(reversed(M.dims))


def test_weight_one_is_unique():
    M = random_module(random.Random(0), 1)
    assert M.dims == (1, 1) and M.action == [[[0, 0], [1, 0]]]
    with pytest.raises(CheckError):
        random_module(random.Random(0), 1, r=2)


@pytest.mark.parametrize("seed", range(5))
def test_framed_modules_are_framed(seed):
    rng = random.Random(seed)
    M = random_module(rng, 4, framed=True, isolated=1)
    assert check_framing(M).ok and validate_module(M).ok


def test_isolated_pairs_break_generation():
    M = gorenstein_module({(5,): Fraction(2)}, 1, 5)
    N = add_isolated_pairs(M, [2])
    assert N.dims == (1, 1, 2, 2, 1, 1) and validate_module(N).ok
    assert not check_framing(N).ok
    with pytest.raises(CheckError):
        add_isolated_pairs(M, [1])


@pytest.mark.parametrize("seed,k,r", [(0, 3, 1), (1, 3, 2), (2, 4, 1), (3, 4, 2), (4, 5, 1)])
def test_random_potentials_satisfy_wdvv(seed, k, r):
    rng = random.Random(seed)
    M = random_module(rng, k, r=r, max_dim=12)
    P = random_potential(rng, M, 4)
    assert not P.is_zero()
    assert validate_quantum_potential(M, P).ok


@pytest.mark.parametrize("seed", range(4))
def test_invalid_potentials_fail_wdvv(seed):
    rng = random.Random(seed)
    M = random_module(rng, 4, r=2)
    P = random_potential(rng, M, 4, valid=False)
    assert not validate_quantum_potential(M, P).ok


def test_tensor_product():
    E = gorenstein_module({(1,): Fraction(1)}, 1, 1)
    T = tensor_module(E, E)
    assert T.dims == (1, 2, 1) and validate_module(T).ok
    Q = gorenstein_module({(3,): Fraction(1)}, 1, 3)
    T = tensor_module(Q, E)
    assert T.weight == 4 and T.dims == (1, 2, 2, 2, 1) and validate_module(T).ok


@pytest.mark.parametrize("seed", range(8))
def test_random_split_mhs(seed):
    I, mhs = random_split_mhs(random.Random(seed), 5)
    assert sum(I.dims().values()) == 5
    assert all(I.dims().get((q, p)) == d for (p, q), d in I.dims().items())
    assert all(S.conj() == I[(q, p)] for (p, q), S in I.pieces.items())
    assert is_split_real(I) == all(p == q for p, q in I.pieces)
    assert mhs.validate().ok
    assert deligne_bigrading(mhs) == I


@given(st.lists(st.integers(1, 3), min_size=1, max_size=3), st.integers(0, 100))
def test_jordan_nilpotent_blocks(blocks, seed):
    n = sum(blocks)
    N = jordan_nilpotent(random.Random(seed), n, blocks)
    assert nilpotency_index(N) == max(blocks)
    P = N
    for m in range(1, max(blocks)):
        # rank N^m = sum of (b - m) over blocks longer than m
        assert rank(P) == sum(b - m for b in blocks if b > m)
        P = matmul(P, N)
