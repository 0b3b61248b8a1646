from fractions import Fraction

import pytest

from dltts.system import (
    FAIL,
    VIOLATION,
    Branch,
    Dltts,
    RunError,
    ScriptStep,
    State,
    oracle_distances,
    violation_probability,
)
from dltts.saturation import Tag
from builders import HOSPITAL, L2, L4, L5, MEN_STEP, TARGET, hospital_engine


@pytest.fixture
def tree():
    return hospital_engine().run([MEN_STEP])


def test_root_step_distribution(tree):
    t = tree.transition_from("s")
    assert [(sid, p) for sid, p in t.distribution] == [("s0", 0), ("s1", Fraction(1, 3)), ("s2", Fraction(2, 3))]


def test_only_s2_is_violated(tree):
    assert [s.id for s in tree.violated_states()] == ["s2"]
    assert tree.transition_from("s2").action == VIOLATION
    assert tree.transition_from("s2").distribution == ((FAIL, 1),)


def test_witness_has_the_pattern_headers(tree):
    # wider join records also entail the pattern; the projected one is reported
    w = tree.states["s2"].report.witness
    assert set(w.schema.names) == set(HOSPITAL.names)
    assert str(w) == "(John, 46, M, Physics, CoVid)"


def test_violation_probability(tree):
    assert violation_probability(tree) == Fraction(2, 3)
    assert tree.states[FAIL].path_probability == Fraction(2, 3)


def test_fail_state_is_absorbing(tree):
    assert tree.transition_from(FAIL) is None
    with pytest.raises(RunError):
        hospital_engine().step(tree.states[FAIL], MEN_STEP.branches)


def test_violated_state_only_goes_to_fail(tree):
    with pytest.raises(RunError):
        hospital_engine().step(tree.states["s2"], MEN_STEP.branches)


def test_no_notice_no_violation():
    tree = hospital_engine(male_cases=0).run([MEN_STEP])
    assert violation_probability(tree) == 0
    assert not tree.fail_reachable()
    assert FAIL not in tree.states


def test_oracle_distances(tree):
    d = oracle_distances(tree, [TARGET])
    assert d["s0"] == Fraction(15, 10)
    assert d["s1"] == Fraction(6, 5)
    assert d["s2"] == 0  # John's record is deduced
    assert "s" not in d


def test_oracle_distances_need_target(tree):
    with pytest.raises(RunError):
        oracle_distances(tree, [])


def test_empty_branch_keeps_knowledge():
    eng = hospital_engine()
    root = eng.initial()
    _, (child,) = eng.step(root, [Branch((), 1)])
    assert child.saturated == root.saturated
    assert child.report.verdict == root.report.verdict


def test_child_tag_extends_parent(tree):
    for s in tree.non_fail():
        if s.parent is not None:
            assert tree.states[s.parent].saturated.issubset(s.tag)
            assert s.tag.issubset(s.saturated)


def test_distribution_must_sum_to_one():
    with pytest.raises(RunError):
        ScriptStep("q", [Branch((L2,), Fraction(1, 2)), Branch((L4,), Fraction(1, 3))])
    with pytest.raises(RunError):
        ScriptStep("q", [])


def test_two_violating_leaves():
    # second step: from s1 and s0 re-ask; l5 answers violate
    step2 = ScriptStep("again", [Branch((L5,), Fraction(1, 2)), Branch((L4,), Fraction(1, 2))])
    step1 = ScriptStep("first", [Branch((L4,), Fraction(1, 3)), Branch((L2,), Fraction(1, 3)), Branch((L5,), Fraction(1, 3))])
    tree = hospital_engine().run([step1, step2])
    # oracle: enumerate paths by hand
    # l4 -> l5: 1/3*1/2, l2 -> l5: 1/3*1/2, l5: 1/3
    assert violation_probability(tree) == Fraction(1, 6) + Fraction(1, 6) + Fraction(1, 3)
    assert tree.fail_reachable()


def test_disjoint_violating_leaves_sum():
    step1 = ScriptStep("q", [Branch((L5,), Fraction(1, 3)), Branch((L4,), Fraction(2, 3))])
    step2 = ScriptStep("r", [Branch((L5,), Fraction(1, 4)), Branch((L2,), Fraction(3, 4))])
    tree = hospital_engine().run([step1, step2])
    # s0 violated at 1/3; s1 -> l5 at 2/3 * 1/4 = 1/6
    assert violation_probability(tree) == Fraction(1, 2)


def test_zero_probability_violation_is_unreachable():
    step = ScriptStep("q", [Branch((L5,), 0), Branch((L4,), 1)])
    tree = hospital_engine().run([step])
    assert tree.violated_states()
    assert violation_probability(tree) == 0
    assert not tree.fail_reachable()
    assert FAIL in tree.reachable(positive_only=False)


def test_trace_records(tree):
    rows = {r["id"]: r for r in tree.trace()}
    assert rows["s2"]["verdict"] == "violated"
    assert rows["s1"]["probability"] == Fraction(1, 3)
    assert any(rel == "john_record" and prov == "deduced" for rel, _, prov in rows["s2"]["delta"])


def test_sampling_is_seeded():
    eng = hospital_engine()
    runs = [eng.sample([MEN_STEP], 7).ids for _ in range(3)]
    assert runs[0] == runs[1] == runs[2]
    seen = {tuple(eng.sample([MEN_STEP], seed).ids) for seed in range(40)}
    assert ("s", "s0") not in seen  # probability 0
    assert ("s", "s2", FAIL) in seen


def test_state_cap():
    eng = hospital_engine()
    eng.max_states = 3
    with pytest.raises(RunError):
        eng.run([MEN_STEP])
