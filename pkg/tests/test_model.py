import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcbp.errors import ArgumentError, ModelError
from dcbp.model import (
    OffspringLaw,
    SdcbpModel,
    SocialNetworkParams,
    TcvdbpModel,
    VdcbpModel,
    build_social_network_model,
    check,
    generator_matrix,
    model_a,
    pgf_eval,
    validate,
)
from helpers import brute_generator, random_sdcbp, random_tcvdbp


def test_pgf_normalization_and_model_a_atoms():
    m = model_a()
    assert pgf_eval(m, 0, [1.0, 1.0]) == pytest.approx(1.0, abs=1e-12)
    assert pgf_eval(m, 1, [1.0, 1.0]) == pytest.approx(1.0, abs=1e-12)
    # type 1 with no type-1 offspring: the 0.4 branch
    assert pgf_eval(m, 0, [0.0, 1.0]) == pytest.approx(0.4, abs=1e-15)
    # no type-2 offspring: the 0.5 branch
    assert pgf_eval(m, 0, [1.0, 0.0]) == pytest.approx(0.5, abs=1e-15)


def test_pgf_identity_for_single_self_offspring():
    m = SdcbpModel([1.0], (OffspringLaw.deterministic([1]),))
    for x in (0.0, 0.3, 0.77, 1.0):
        assert pgf_eval(m, 0, [x]) == pytest.approx(x, abs=1e-15)


def test_pgf_dimension_mismatch():
    with pytest.raises(ArgumentError):
        pgf_eval(model_a(), 0, [1.0])
    with pytest.raises(ArgumentError):
        pgf_eval(model_a(), 2, [1.0, 1.0])


def test_model_a_joint_law_atoms():
    law = model_a().laws[0]
    atoms = {tuple(c): p for c, p in zip(law.counts.tolist(), law.probs)}
    assert atoms == pytest.approx({(0, 0): 0.2, (0, 1): 0.2, (2, 0): 0.3, (2, 1): 0.3})


def test_generator_examples():
    np.testing.assert_allclose(generator_matrix(model_a()), [[0.2, 0.5], [0.0, 0.5]], atol=1e-15)
    dead = SdcbpModel([1.0], (OffspringLaw.deterministic([0]),))
    np.testing.assert_array_equal(generator_matrix(dead), [[-1.0]])
    laws = (OffspringLaw.deterministic([0, 0]), OffspringLaw.deterministic([0, 0]))
    tc = TcvdbpModel(1, 1, 1.0, 2.0, np.eye(2), laws)
    np.testing.assert_array_equal(generator_matrix(tc), np.zeros((2, 2)))


def test_generator_matches_atom_summation():
    rng = np.random.default_rng(5)
    for n in range(1, 6):
        m = random_sdcbp(rng, n)
        np.testing.assert_allclose(generator_matrix(m), brute_generator(m), atol=1e-14)
    for M, E in [(1, 1), (2, 3), (3, 2)]:
        m = random_tcvdbp(rng, M, E)
        np.testing.assert_allclose(generator_matrix(m), brute_generator(m), atol=1e-14)


def test_sdcbp_generator_exactly_upper_triangular():
    rng = np.random.default_rng(6)
    for n in range(2, 7):
        g = generator_matrix(random_sdcbp(rng, n))
        assert np.all(np.tril(g, -1) == 0.0)


def test_tc_with_theta_zero_equals_vdcbp():
    rng = np.random.default_rng(7)
    tc = random_tcvdbp(rng, 2, 2, theta=0.0, lambda_v=1.7)
    v = VdcbpModel(2, 2, np.full(4, 1.7), tc.share_laws)
    np.testing.assert_allclose(generator_matrix(tc), generator_matrix(v), atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(0.0, 1.0), min_size=2, max_size=2),
    st.integers(0, 1),
    st.integers(0, 1),
    st.floats(0.0, 1.0),
)
def test_pgf_monotone_in_each_component(s, i, j, bump):
    m = model_a()
    s = np.array(s)
    hi = s.copy()
    hi[j] = s[j] + (1.0 - s[j]) * bump
    assert pgf_eval(m, i, hi) >= pgf_eval(m, i, s) - 1e-15
    assert 0.0 <= pgf_eval(m, i, s) <= 1.0 + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 5))
def test_pgf_at_one_is_one(seed, n):
    m = random_sdcbp(np.random.default_rng(seed), n)
    for i in range(n):
        assert abs(pgf_eval(m, i, np.ones(n)) - 1.0) <= 1e-12


def test_validate_examples():
    assert validate(model_a()) == []
    back = OffspringLaw.deterministic([1, 0])
    bad = SdcbpModel([1.0, 1.0], (model_a().laws[0], back))
    v = validate(bad)
    assert len(v) == 1 and v[0].invariant == "triangular support"
    a = np.array([[0.9]])
    tc = TcvdbpModel.from_blocks(0.5, 1.0, a, np.array([[1.0]]), [OffspringLaw.deterministic([1, 0]), OffspringLaw.deterministic([0, 1])])
    v = validate(tc)
    assert len(v) == 1 and v[0].invariant == "row-stochastic"


def test_validate_reports_without_raising():
    law = OffspringLaw.from_atoms([([0], 0.5), ([1], 0.4)])
    v = validate(SdcbpModel([-1.0], (law,)))
    names = {x.invariant for x in v}
    assert names == {"rates strictly positive", "probabilities sum to 1"}
    with pytest.raises(ModelError) as exc:
        check(SdcbpModel([-1.0], (law,)))
    assert len(exc.value.violations) == 2


def test_validate_vdcbp_blocks():
    n1 = OffspringLaw.product(3, {0: {0: 0.5, 2: 0.5}, 2: {0: 0.5, 1: 0.5}})
    n2 = OffspringLaw.product(3, {1: {0: 0.5, 2: 0.5}, 0: {0: 0.5, 1: 0.5}})
    v = validate(VdcbpModel(1, 2, [1, 1, 1], (n1, n2, n2)))
    names = [x.invariant for x in v]
    assert "class 2 never produces class 1" in names
    assert "irreducible block" in names


def test_exclusive_share_law_cannot_produce_mixed():
    laws = [OffspringLaw.deterministic([0, 1]), OffspringLaw.deterministic([1, 0])]
    tc = TcvdbpModel.from_blocks(0.5, 1.0, [[1.0]], [[1.0]], laws)
    assert [x.invariant for x in validate(tc)] == ["exclusive never produces mixed"]


def test_count_vector_length_mismatch():
    law = OffspringLaw.deterministic([1, 0, 0])
    v = validate(SdcbpModel([1.0], (law,)))
    assert v and v[0].invariant == "count vector length"


def test_from_atoms_rejects_fractional_counts():
    with pytest.raises(ArgumentError):
        OffspringLaw.from_atoms([([0.5], 1.0)])


def test_models_are_immutable():
    m = model_a()
    with pytest.raises(ValueError):
        m.rates[0] = 2.0
    with pytest.raises(ValueError):
        m.laws[0].probs[0] = 0.0


# --------------------------------------------------------------------------
# social-network construction
# --------------------------------------------------------------------------

PARAMS = dict(
    eta1=0.6, eta2=0.4, delta_att=0.7, theta=0.3, lambda_v=1.3, mean_friends=4.5,
    read_probs=(0.8,), level_probs=(0.9,), p=0.3, N=2,
)


def test_social_n2_entries_by_hand():
    P = SocialNetworkParams(**PARAMS)
    tc = build_social_network_model(P, 1)
    assert (tc.mixed, tc.exclusive) == (2, 2)
    th, lv, m, d, e1, e2, r, rho, p = 0.3, 1.3, 4.5, 0.7, 0.6, 0.4, 0.8, 0.9, 0.3
    c_mx = d * (1 - th) * e1 * e2 * m
    z1, zp1 = p * c_mx * rho, (1 - p) * c_mx * rho
    c_mx1 = (1 - th) * m * e1 * (1 - d * e2)
    cp_mx1 = (1 - th) * m * d * e1 * (1 - e2)
    ex_share = (1 - th) * m * e1 * r * rho
    # rows: mixed (level 1, post 1 on top), mixed (level 1, post 2 on top), ex level 1, ex level 2
    expected = lv * np.array([
        [zp1 * r - 1, z1 * r, c_mx1 * r * rho, th],
        [z1 * r, zp1 * r - 1, cp_mx1 * r * rho, 0.0],
        [0.0, 0.0, ex_share - 1, th],
        [0.0, 0.0, 0.0, -1.0],
    ])
    np.testing.assert_allclose(generator_matrix(tc), expected, atol=1e-12)
    assert validate(tc) == []


def test_social_target_two_swaps_roles():
    P = SocialNetworkParams(**PARAMS)
    tc = build_social_network_model(P, 2)
    a = tc.type_change
    assert a[1, 3] == 1.0 and a[0, 3] == 0.0
    g = generator_matrix(tc)
    th, m, d, e1, e2, r, rho = 0.3, 4.5, 0.7, 0.6, 0.4, 0.8, 0.9
    assert g[1, 2] == pytest.approx(1.3 * (1 - th) * m * e2 * (1 - d * e1) * r * rho)
    assert g[0, 2] == pytest.approx(1.3 * (1 - th) * m * d * e2 * (1 - e1) * r * rho)


def test_social_zero_quality_is_pure_shift():
    P = SocialNetworkParams(**{**PARAMS, "eta1": 0.0, "eta2": 0.0})
    tc = build_social_network_model(P, 1)
    np.testing.assert_array_equal(tc.share_means(), np.zeros((4, 4)))
    np.testing.assert_allclose(generator_matrix(tc), 1.3 * (0.3 * tc.type_change - np.eye(4)))


def test_social_theta_zero_has_no_type_change_part():
    P = SocialNetworkParams(**{**PARAMS, "theta": 0.0})
    tc = build_social_network_model(P, 1)
    np.testing.assert_allclose(generator_matrix(tc), 1.3 * (tc.share_means() - np.eye(4)))


def test_social_share_law_mean_is_exact():
    P = SocialNetworkParams(**{**PARAMS, "N": 3, "read_probs": (0.8, 0.5), "level_probs": (0.6, 0.3)})
    tc = build_social_network_model(P, 1)
    m = tc.share_means()
    # total mean friends reached by a level-1 exclusive share: m r_1 eta_1 (rho_1 + rho_2)
    assert m[4].sum() == pytest.approx(4.5 * 0.8 * 0.6 * 0.9)
    assert m[6].sum() == 0.0  # level N is never read
    for law in tc.share_laws:
        assert abs(law.probs.sum() - 1.0) < 1e-12


def test_social_invalid():
    with pytest.raises(ArgumentError):
        build_social_network_model(SocialNetworkParams(**{**PARAMS, "N": 1, "read_probs": (), "level_probs": ()}), 1)
    with pytest.raises(ArgumentError):
        build_social_network_model(SocialNetworkParams(**PARAMS), 3)
    assert validate(SocialNetworkParams(**{**PARAMS, "level_probs": (1.2,)}))
