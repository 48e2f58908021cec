import random
from fractions import Fraction

import pytest

from hodgefrob.amodel import build_vhs_germ, gamma_minus1_from_potential
from hodgefrob.degeneration import (
    GBigrading, VHSGerm, coordinate_change, g_bigrading, gamma_from_gamma_minus1, gamma_normal_form, higgs_conditions,
    higgs_field, horizontality_check, horizontality_check_with_logs, nilpotent_orbit_factor, psi_convolution_check,
    psi_filtration, random_unit, same_germ_of_filtrations, symbolic_rescale_check, validate_germ, x_from_germ,
)
from hodgefrob.frobmod import Potential, quantum_action
from hodgefrob.generators import random_module, random_potential, random_split_mhs
from hodgefrob.hodge import Bigrading, barphi
from hodgefrob.linfilt import Subspace
from hodgefrob.qseries import MatSeries, Series, exp_nilpotent
from hodgefrob.report import CheckError

from conftest import D, quintic_like

ORDER = 4


def _germ(seed, k, r=None, order=ORDER):
    rng = random.Random(seed)
    M = random_module(rng, k, r=r, framed=True)
    P = random_potential(rng, M, order)
    return M, P, build_vhs_germ(M, P)


@pytest.fixture(scope="module")
def quintic_germ():
    M = quintic_like(5)
    P = Potential(3, 1, D, Series.q(0, 1, D))
    return M, P, build_vhs_germ(M, P)


# bigrading of End(V) -------------------------------------------------------

def test_hodge_tate_endomorphism_bigrading(quintic_germ):
    M, _, G = quintic_germ
    g, rep = g_bigrading(G.bigrading)
    assert rep.ok
    assert all(r == s for r, s in g.dims())
    assert g.dims() == {(-3, -3): 1, (-2, -2): 2, (-1, -1): 3, (0, 0): 4, (1, 1): 3, (2, 2): 2, (3, 3): 1}
    # negative part is strictly lower block triangular in the degree ordering
    deg = M.degrees()
    for rs, dim in g.dims().items():
        if rs[0] < 0:
            for X in g.basis(rs):
                assert all(X[i][j] == 0 for i in range(4) for j in range(4) if deg[i] <= deg[j])


def test_one_dimensional_has_no_negative_part():
    I = Bigrading(1, {(0, 0): Subspace.full(1)})
    g, rep = g_bigrading(I)
    assert rep.ok and g.dims() == {(0, 0): 1}


@pytest.mark.parametrize("seed", range(6))
def test_random_split_dimension_count(seed):
    I, _ = random_split_mhs(random.Random(seed), 5)
    g, rep = g_bigrading(I)
    assert rep.ok
    d = I.dims()
    want = {}
    for (a, b), x in d.items():
        for (c, e), y in d.items():
            want[(c - a, e - b)] = want.get((c - a, e - b), 0) + x * y
    assert g.dims() == dict(sorted(want.items()))


# normal form ----------------------------------------------------------------

def test_normal_form_of_constant_germ(quintic_germ):
    _, _, G = quintic_germ
    frame = MatSeries.identity(G.n, 1, ORDER)
    assert not gamma_normal_form(frame, G.Finf, G.bigrading)


def test_normal_form_recovers_negative_exponent(quintic_germ):
    _, _, G = quintic_germ
    g = G.gb
    E = g.basis((-1, -1))[1]
    qE = MatSeries.from_matrix(E, 1, ORDER).map(lambda s: s * Series.q(0, 1, ORDER))
    assert gamma_normal_form(exp_nilpotent(qE), G.Finf, G.bigrading) == qE


def test_normal_form_absorbs_stabilizer_part(quintic_germ):
    _, _, G = quintic_germ
    g = G.gb
    E = g.basis((-1, -1))[0]
    S = g.basis((1, 1))[0]
    X = MatSeries.from_matrix([[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(E, S)], 1, ORDER)
    X = X.map(lambda s: s * Series.q(0, 1, ORDER))
    frame = exp_nilpotent(X)
    Gamma = gamma_normal_form(frame, G.Finf, G.bigrading)
    assert Gamma != X and g.in_minus(Gamma)
    assert same_germ_of_filtrations(exp_nilpotent(Gamma), frame, G.Finf)


def test_normal_form_rejects_germ_off_the_limit(quintic_germ):
    _, _, G = quintic_germ
    S = G.gb.basis((-1, -1))[0]
    Ts = [[x + (1 if i == j else 0) for j, x in enumerate(row)] for i, row in enumerate(S)]
    # a constant term outside the stabilizer moves Finf
    with pytest.raises(CheckError):
        gamma_normal_form(MatSeries.from_matrix(Ts, 1, ORDER), G.Finf, G.bigrading)


# X and horizontality --------------------------------------------------------

def test_x_for_nilpotent_orbit(quintic_germ):
    _, _, G = quintic_germ
    G0 = G.with_gamma(MatSeries.zero(G.n, 1, ORDER))
    xp = x_from_germ(G0)
    ell = MatSeries.from_matrix(G.Ns[0], 1, ORDER, lbound=G.n).map(lambda s: s * Series.ell(0, 1, ORDER, G.n))
    assert xp.X == ell and xp.X_minus1 == ell
    assert horizontality_check(G0).ok


def test_x_minus1_in_weight_three(quintic_germ):
    _, _, G = quintic_germ
    xp = x_from_germ(G)
    ell = MatSeries.from_matrix(G.Ns[0], 1, D, lbound=G.n).map(lambda s: s * Series.ell(0, 1, D, G.n))
    assert xp.X_minus1 == ell + G.gamma_level(-1).with_lbound(G.n)


@pytest.mark.parametrize("seed,k,r", [(0, 3, 2), (1, 4, 1), (2, 4, 2), (3, 5, 1)])
def test_exp_x_reproduces_product(seed, k, r):
    _, _, G = _germ(seed, k, r)
    xp = x_from_germ(G)
    prod = nilpotent_orbit_factor(G) * exp_nilpotent(G.Gamma.with_lbound(G.n))
    assert exp_nilpotent(xp.X) == prod
    assert G.gb.in_minus(xp.X)


@pytest.mark.parametrize("seed,k,r", [(0, 3, 2), (2, 4, 2), (3, 5, 1)])
def test_x_fixed_point(seed, k, r):
    _, _, G = _germ(seed, k, r)
    G1 = G.gamma_level(-1)
    Gamma = gamma_from_gamma_minus1(G.Finf, G.Ns, G1, G.gb)
    assert Gamma == G.Gamma
    assert x_from_germ(G.with_gamma(Gamma)).X == x_from_germ(G).X


def test_amodel_germs_are_horizontal(quintic_germ):
    for _, _, G in [quintic_germ, _germ(5, 4, 2), _germ(6, 5, 1)]:
        assert validate_germ(G).ok
        assert horizontality_check(G).ok
        assert horizontality_check_with_logs(G).ok


def test_non_integrable_gamma_fails_horizontality(quintic_germ):
    _, _, G = quintic_germ
    rng = random.Random(1)
    E = G.gb.basis((-1, -1))[0]
    bump = MatSeries.from_matrix(E, 1, D).map(lambda s: s * Series.q(0, 1, D) * Series.q(0, 1, D).scale(rng.randint(1, 5)))
    rep = horizontality_check(G.with_gamma(G.Gamma + bump))
    assert not rep.ok
    assert rep.failures()[0].where["failing"][0]["order"] == 2


def test_gamma_from_zero():
    _, _, G = _germ(0, 4, 2)
    Z = MatSeries.zero(G.n, G.r, ORDER)
    assert not gamma_from_gamma_minus1(G.Finf, G.Ns, Z, G.gb)


def test_gamma_minus2_in_weight_three(quintic_germ):
    _, _, G = quintic_germ
    assert G.gamma_level(-2)
    assert horizontality_check(G).ok


def _broken_weight4():
    rng = random.Random(3)
    M = random_module(rng, 4, r=2, framed=True)
    P = random_potential(rng, M, ORDER)
    a = min(P.linear)
    lin = dict(P.linear)
    lin[a] = lin[a] + Series.q(0, 2, ORDER) * Series.q(1, 2, ORDER)
    return M, Potential(4, 2, ORDER, linear=lin)


def test_obstruction_reported_for_inconsistent_gamma_minus1():
    M, P = _broken_weight4()
    G = build_vhs_germ(M, Potential.zero(4, 2, ORDER))
    Gm1 = gamma_minus1_from_potential(M, P)
    with pytest.raises(CheckError) as exc:
        gamma_from_gamma_minus1(G.Finf, G.Ns, Gm1, G.gb)
    assert exc.value.where["order"] == 2


# Higgs field ----------------------------------------------------------------

def test_higgs_conditions_both_directions(quintic_germ):
    for _, _, G in [quintic_germ, _germ(2, 4, 2), _germ(0, 3, 2)]:
        assert higgs_conditions(G).ok and horizontality_check(G).ok
    M, P = _broken_weight4()
    G0 = build_vhs_germ(M, Potential.zero(4, 2, ORDER))
    Gm1 = gamma_minus1_from_potential(M, P)
    G = G0.with_gamma(Gm1)
    assert not higgs_conditions(G).ok
    assert not horizontality_check(G).ok


def test_higgs_field_leading_term(quintic_germ):
    _, _, G = quintic_germ
    G0 = G.with_gamma(MatSeries.zero(G.n, 1, D))
    thetas, rep = higgs_field(G0)
    assert rep.ok
    lead = G0.gb.project(thetas[0], lambda a, b: a >= -1)
    assert lead == MatSeries.from_matrix(G.Ns[0], 1, D, lbound=G.n)


@pytest.mark.parametrize("seed,k,r", [(0, 3, 2), (2, 4, 2), (3, 5, 1)])
def test_higgs_field_filtration_level(seed, k, r):
    _, _, G = _germ(seed, k, r)
    _, rep = higgs_field(G)
    assert rep.ok


def test_connection_matches_quantum_action(quintic_germ):
    M, P, G = quintic_germ
    assert G.connection() == quantum_action(M, P)
    M, P, G = _germ(2, 4, 2)
    assert G.connection() == quantum_action(M, P)


def test_higgs_field_requires_horizontality(quintic_germ):
    _, _, G = quintic_germ
    E = G.gb.basis((-2, -2))[0]
    bump = MatSeries.from_matrix(E, 1, D).map(lambda s: s * Series.q(0, 1, D))
    with pytest.raises(CheckError):
        higgs_field(G.with_gamma(G.Gamma + bump))


# Psi ------------------------------------------------------------------------

def test_psi_hodge_tate(quintic_germ):
    M, _, G = quintic_germ
    psi, rep = psi_filtration(G)
    assert rep.ok
    for p in range(0, 4):
        assert psi[p] == G.weight_filtration[2 * p]
        assert psi[p] == Subspace.span(4, [[1 if i == a else 0 for i in range(4)]
                                           for a in range(4) if M.degrees()[a] >= 2 * (3 - p)])


@pytest.mark.parametrize("seed,k,r", [(1, 4, 1), (2, 4, 2), (4, 4, 2)])
def test_psi_unit_determinant_weight4(seed, k, r):
    _, P, G = _germ(seed, k, r)
    assert not P.is_zero()
    _, rep = psi_filtration(G)
    assert rep.ok


def test_psi_convolution(quintic_germ):
    _, _, G = quintic_germ
    assert psi_convolution_check(G).ok
    assert psi_convolution_check(_germ(2, 4, 2)[2]).ok


def _static_germ(mhs, n):
    Z = [[0] * n for _ in range(n)]
    return VHSGerm(0, mhs.F, [Z], Z, MatSeries.zero(n, 1, 2), mhs.W)


def test_psi_convolution_without_monodromy():
    I, mhs = random_split_mhs(random.Random(8), 4)
    G = _static_germ(mhs, 4)
    assert psi_convolution_check(G).ok
    # with N = 0 the convolution is the conjugate-dual identity for the split structure
    assert barphi(mhs) == GBigrading(I).psi()


@pytest.mark.parametrize("seed", range(3))
def test_psi_on_random_split_germ(seed):
    I, mhs = random_split_mhs(random.Random(13 + seed), 5)
    G = _static_germ(mhs, 5)
    assert G.bigrading == I
    assert psi_convolution_check(G).ok


# coordinate changes ---------------------------------------------------------

def test_identity_coordinate_change(quintic_germ):
    _, _, G = quintic_germ
    assert coordinate_change(G, [Series.const(1, 1, D)]) == G


def test_unit_coordinate_change_keeps_psi(quintic_germ):
    _, _, G = quintic_germ
    f = Series.const(1, 1, D) + Series.q(0, 1, D).scale(3)
    H = coordinate_change(G, [f])
    assert H.Finf == G.Finf and H.Gamma != G.Gamma
    assert psi_filtration(H)[0] == psi_filtration(G)[0]
    assert psi_filtration(H)[1].ok and horizontality_check(H).ok


def test_coordinate_change_round_trip(quintic_germ):
    _, _, G = quintic_germ
    f = Series.const(1, 1, D) + Series.q(0, 1, D).scale(Fraction(-1, 2))
    H = coordinate_change(G, [f])
    # q = h(q~) q~; one extra order so that h is exact through order D
    from hodgefrob.qseries import invert_coordinate_change
    g = invert_coordinate_change([f.with_order(D + 1)])[0]
    back = coordinate_change(H, [g.divide_q(0).with_order(D)])
    assert back.Gamma == G.Gamma


@pytest.mark.parametrize("seed", range(6))
def test_random_unit_changes_keep_psi(seed):
    _, _, G = _germ(seed, 3 + seed % 3, 1 + seed % 2)
    rng = random.Random(seed)
    fs = [random_unit(G.r, G.order, rng) for _ in range(G.r)]
    H = coordinate_change(G, fs)
    assert H.gb.psi() == G.gb.psi()
    assert horizontality_check(H).ok


def test_constant_rescale(quintic_germ):
    _, _, G = quintic_germ
    with pytest.raises(CheckError):
        coordinate_change(G, [Series.const(2, 1, D)])
    H = coordinate_change(G, [Series.const(2, 1, D)], log_over_tau=[Fraction(1, 5)])
    assert H.Finf != G.Finf
    assert H.gb.psi() == G.gb.psi()
    assert symbolic_rescale_check(G).ok


def test_zero_unit_rejected(quintic_germ):
    _, _, G = quintic_germ
    with pytest.raises(CheckError):
        coordinate_change(G, [Series.q(0, 1, D)])
