from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from dltts.compare import Config, Decision, compare_configs
from dltts.model import ModelError
from dltts.saturation import Tag
from builders import L2, L4, L5, MEN_STEP, TARGET, hospital_engine

THIRD, TWO_THIRDS = Fraction(1, 3), Fraction(2, 3)


def step_config(p=1, probs=(THIRD, TWO_THIRDS)):
    return Config(Tag(), Fraction(p), ((Tag({L4}), probs[0]), (Tag({L5}), probs[1])))


def test_identical_configs_continue_with_l5():
    res = compare_configs(step_config(), step_config(), [TARGET])
    assert res.decision is Decision.CONTINUE_WITH_CONFIG1
    assert res.chosen == 1
    assert res.d_min == res.d_min_other == Fraction(11, 10)
    assert res.distances == (Fraction(6, 5), Fraction(11, 10))


def test_farther_config_returns():
    c1 = Config(Tag(), 1, ((Tag({L2}), Fraction(1)),))
    assert compare_configs(c1, step_config(), [TARGET]).decision is Decision.RETURN


def test_successor_more_likely_than_parent_returns():
    c1 = step_config(p=Fraction(1, 2))  # l5 carries 2/3 > 1/2
    res = compare_configs(c1, step_config(), [TARGET])
    assert res.decision is Decision.RETURN and res.chosen is None


def test_less_likely_than_other_side_returns():
    c1 = step_config(probs=(TWO_THIRDS, THIRD))
    assert compare_configs(c1, step_config(), [TARGET]).decision is Decision.RETURN


def test_tie_break_largest_probability_then_index():
    c = Config(Tag(), 1, ((Tag({L5}), Fraction(1, 4)), (Tag({L5, L4}), Fraction(1, 2)), (Tag({L5}), Fraction(1, 4))))
    other = Config(Tag(), 1, ((Tag({L4}), Fraction(1, 4)), (Tag({L2}), Fraction(3, 4))))
    assert compare_configs(c, other, [TARGET]).chosen == 1
    c = Config(Tag(), 1, ((Tag({L5}), Fraction(1, 2)), (Tag({L5}), Fraction(1, 2))))
    assert compare_configs(c, other, [TARGET]).chosen == 0


def test_parent_already_at_target_rejected():
    c = Config(Tag({TARGET}), 1, ((Tag({L4}), Fraction(1)),))
    with pytest.raises(ModelError):
        compare_configs(c, step_config(), [TARGET])


def test_config_validation():
    with pytest.raises(ModelError):
        Config(Tag(), 1, ())
    with pytest.raises(ModelError):
        Config(Tag(), 1, ((Tag({L4}), Fraction(1, 2)),))
    with pytest.raises(ModelError):
        compare_configs(step_config(), step_config(), [])


def test_config_from_tree():
    tree = hospital_engine(male_cases=0).run([MEN_STEP])
    c = Config.from_tree(tree, "s")
    assert [p for _, p in c.successors] == [0, THIRD, TWO_THIRDS]
    res = compare_configs(c, c, [TARGET])
    assert res.decision is Decision.CONTINUE_WITH_CONFIG1 and res.chosen == 2
    with pytest.raises(ModelError):
        Config.from_tree(tree, "s1")


weights = st.lists(st.integers(1, 5), min_size=2, max_size=3)
records = st.sampled_from([L2, L4, L5])


@settings(max_examples=100, deadline=None)
@given(weights, st.lists(records, min_size=3, max_size=3), st.randoms(use_true_random=False), st.integers(1, 3))
def test_decision_invariant_under_reordering(w, recs, rnd, pden):
    total = sum(w)
    succ = [(Tag({r}), Fraction(x, total)) for x, r in zip(w, recs)]
    p = Fraction(1, pden)
    other = step_config()
    before = compare_configs(Config(Tag(), p, succ), other, [TARGET])
    rnd.shuffle(succ)
    after = compare_configs(Config(Tag(), p, succ), other, [TARGET])
    assert before.decision == after.decision
    assert before.d_min == after.d_min
