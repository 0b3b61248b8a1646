import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dltts.mechanisms import (
    COINS,
    DISCRETE,
    HAMMING,
    INPUTS,
    OUTPUTS,
    RHO,
    Adjacency,
    FiniteMechanism,
    MechanismError,
    adjacency_eval,
    audit_dp,
    audit_ldp,
    bounded_noise,
    bounded_noise_samples,
    check_indist,
    check_local_indist,
    check_output_indist,
    probability_pairs,
    randomized_response,
    randomized_response_coins,
    ratio,
)
from dltts.model import IntInterval, Number
from builders import L2, L4, L5_CLOSED

LN32 = math.log(1.5)


def rr_by_coins(x):
    """Answer distribution by enumerating the two fair coins: heads on the
    first reports the truth, otherwise the second coin is reported."""
    out = {True: Fraction(0), False: Fraction(0)}
    for f1, f2 in itertools.product(COINS, COINS):
        ans = x if f1 == "H" else (f2 == "H")
        out[ans] += Fraction(1, 4)
    return out


def test_rr_table_matches_coin_enumeration():
    rr = randomized_response()
    for x in (True, False):
        assert rr.table[x] == rr_by_coins(x)
    assert rr.prob(True, True) == Fraction(3, 4)


def test_rr_probability_pairs():
    want = {(Fraction(a, 4), Fraction(b, 4)) for a in (1, 3) for b in (1, 3)}
    assert probability_pairs(randomized_response()) == want


def test_rr_local_indist():
    rr = randomized_response()
    assert check_local_indist(rr, True, False, True, math.log(3))
    assert not check_local_indist(rr, True, False, True, 0.5)
    assert check_local_indist(rr, True, True, True, 0)


def test_rr_audits():
    assert math.isclose(audit_ldp(randomized_response()).epsilon, math.log(3), abs_tol=1e-12)
    assert math.isclose(audit_dp(randomized_response()).epsilon, math.log(3), abs_tol=1e-12)
    assert math.isclose(audit_ldp(randomized_response_coins()).epsilon, math.log(3), abs_tol=1e-12)


def test_rr_output_indist():
    assert check_output_indist(randomized_response(), True, False, math.log(3))
    assert not check_output_indist(randomized_response(), True, False, 1.0)


def test_identity_mechanism_is_not_ldp():
    ident = FiniteMechanism(("a", "b"), ("a", "b"), {"a": {"a": 1}, "b": {"b": 1}})
    assert audit_ldp(ident).epsilon == math.inf
    assert not audit_ldp(ident).finite


def test_uniform_mechanism_costs_nothing():
    u = FiniteMechanism(("a", "b", "c"), (0, 1), {v: {0: Fraction(1, 2), 1: Fraction(1, 2)} for v in "abc"})
    assert audit_ldp(u).epsilon == 0
    assert check_output_indist(u, 0, 0, 0)


def test_ratio_conventions():
    assert ratio(Fraction(0), Fraction(0)) == 1
    assert ratio(Fraction(1, 2), Fraction(0)) is None
    assert ratio(Fraction(1, 4), Fraction(3, 4)) == 3


def test_mechanism_validation():
    with pytest.raises(MechanismError):
        FiniteMechanism(("a",), (0, 1), {"a": {0: Fraction(1, 2), 1: Fraction(1, 3)}})
    with pytest.raises(MechanismError):
        FiniteMechanism(("a",), (0,), {"a": {0: 1, 7: 0}})
    with pytest.raises(MechanismError):
        randomized_response().prob("maybe", True)


EX4 = FiniteMechanism(("men",), ("l2", "l4", "l5"), {"men": {"l2": 0, "l4": Fraction(2, 5), "l5": Fraction(3, 5)}})
EX4_DATA = {"l2": L2, "l4": L4, "l5": L5_CLOSED}


def test_men_query_adjacencies():
    assert adjacency_eval(RHO, L4, L5_CLOSED) == Fraction(39, 20)
    assert adjacency_eval(HAMMING, L4, L5_CLOSED) == 2
    for kind in (RHO, HAMMING, DISCRETE):
        assert adjacency_eval(kind, L4, L4) == 0


def test_men_query_audits():
    rho_r = audit_dp(EX4, Adjacency(RHO, data=EX4_DATA), OUTPUTS, ("l4", "l5"))
    ham_r = audit_dp(EX4, Adjacency(HAMMING, data=EX4_DATA), OUTPUTS, ("l4", "l5"))
    assert (rho_r.ratio, rho_r.adjacency) == (Fraction(3, 2), Fraction(39, 20))
    assert abs(rho_r.epsilon - Fraction(20, 39) * LN32) < 1e-12
    assert abs(ham_r.epsilon - LN32 / 2) < 1e-12
    assert str(rho_r) == "(20/39)*ln(3/2)" and str(ham_r) == "(1/2)*ln(3/2)"


def test_men_query_zero_output_is_always_distinguishable():
    for eps in (0, 1, 100):
        assert not check_output_indist(EX4, "l2", "l4", eps)
    assert audit_dp(EX4, Adjacency(RHO, data=EX4_DATA), OUTPUTS).epsilon == math.inf


def test_men_query_indist_at_threshold():
    adj = Adjacency(RHO, data=EX4_DATA)
    eps = float(Fraction(20, 39)) * LN32
    assert check_indist(EX4, "l4", "l5", adj, eps, OUTPUTS)
    assert not check_indist(EX4, "l4", "l5", adj, eps * 0.99, OUTPUTS)


def test_zero_adjacency_with_different_rows():
    m = FiniteMechanism(("a", "b"), (0, 1), {"a": {0: Fraction(1, 3), 1: Fraction(2, 3)}, "b": {0: Fraction(2, 3), 1: Fraction(1, 3)}})
    r = audit_dp(m, lambda x, y: 0)
    assert r.epsilon == math.inf


def test_unknown_adjacency():
    with pytest.raises(MechanismError):
        Adjacency("cosine")
    with pytest.raises(MechanismError):
        audit_dp(randomized_response(), over="pairs")


# brute force: the audit is the least epsilon of the checks

probs = st.lists(st.integers(0, 4), min_size=2, max_size=4).filter(lambda w: sum(w) > 0)


@st.composite
def mechanisms(draw, max_inputs=4):
    n_out = draw(st.integers(2, 4))
    n_in = draw(st.integers(2, max_inputs))
    table = {}
    for v in range(n_in):
        w = draw(st.lists(st.integers(0, 4), min_size=n_out, max_size=n_out).filter(lambda w: sum(w) > 0))
        table[v] = {a: Fraction(x, sum(w)) for a, x in enumerate(w)}
    return FiniteMechanism(tuple(range(n_in)), tuple(range(n_out)), table)


@settings(max_examples=150, deadline=None)
@given(mechanisms())
def test_audit_ldp_is_least_epsilon(m):
    r = audit_ldp(m)
    triples = [(v, w, a) for v in m.inputs for w in m.inputs for a in m.outputs]
    if not r.finite:
        assert not all(check_local_indist(m, v, w, a, 1e6) for v, w, a in triples)
        return
    eps = r.epsilon
    assert all(check_local_indist(m, v, w, a, eps) for v, w, a in triples)
    if eps > 0:
        assert not all(check_local_indist(m, v, w, a, eps - 1e-6) for v, w, a in triples)


@settings(max_examples=100, deadline=None)
@given(mechanisms(), st.floats(0, 3))
def test_indist_is_monotone_in_epsilon(m, eps):
    for v, w in itertools.combinations(m.inputs, 2):
        for a in m.outputs:
            if check_local_indist(m, v, w, a, eps):
                assert check_local_indist(m, v, w, a, eps + 0.5)


@settings(max_examples=100, deadline=None)
@given(mechanisms(), st.floats(0, 3))
def test_singletons_suffice_for_output_sets(m, eps):
    """Per-output ratio bounds imply the bound for every output set."""
    for v, w in itertools.combinations(m.inputs, 2):
        if all(check_local_indist(m, v, w, a, eps) for a in m.outputs):
            for k in range(1, len(m.outputs) + 1):
                for s in itertools.combinations(m.outputs, k):
                    p, q = m.prob_set(v, s), m.prob_set(w, s)
                    assert float(p) <= math.exp(eps) * float(q) + 1e-12
                    assert float(q) <= math.exp(eps) * float(p) + 1e-12


# bounded noise

DOM = IntInterval(0, 100)


@pytest.mark.parametrize("mech", ["laplace", "gauss", "exponential"])
def test_noise_degenerate_scale(mech):
    for seed in range(5):
        assert bounded_noise(Number(50), mech, 1e-9, DOM, seed) == Number(50)


@pytest.mark.parametrize("mech", ["laplace", "gauss", "exponential"])
def test_noise_reproducible_and_bounded(mech):
    a = bounded_noise_samples(50, mech, 5.0, DOM, 123, n=200)
    b = bounded_noise_samples(50, mech, 5.0, DOM, 123, n=200)
    assert np.array_equal(a, b)
    assert a.min() >= 0 and a.max() <= 100


@pytest.mark.parametrize("mech", ["laplace", "gauss", "exponential"])
def test_noise_mean_on_symmetric_domain(mech):
    n, scale = 100_000, 3.0
    x = bounded_noise_samples(50, mech, scale, DOM, np.random.default_rng(2024), n=n)
    sd = x.std()
    assert abs(x.mean() - 50) <= 3 * max(sd, scale) / math.sqrt(n)


def test_noise_clamp_mode():
    x = bounded_noise_samples(99, "laplace", 20.0, DOM, 1, n=500, mode="clamp")
    assert x.max() == 100


def test_noise_errors():
    with pytest.raises(MechanismError):
        bounded_noise(Number(5), "laplace", 0, DOM, 1)
    with pytest.raises(MechanismError):
        bounded_noise(Number(5), "cauchy", 1, DOM, 1)
    with pytest.raises(MechanismError):
        bounded_noise(IntInterval(1, 3), "laplace", 1, DOM, 1)
