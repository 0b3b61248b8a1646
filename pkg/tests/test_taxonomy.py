from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dltts.taxonomy import Taxonomy, TaxonomyError
from builders import AILMENT


def test_depth_counts_root_as_one():
    assert AILMENT.depth("Ailment") == 1
    assert AILMENT.depth("Cancer") == 2
    assert AILMENT.depth("CoVid") == 3


def test_wu_palmer_on_ailments():
    assert AILMENT.wu_palmer("Cancer", "CoVid") == Fraction(2, 5)
    assert AILMENT.wu_palmer("Viral-Infection", "CoVid") == Fraction(4, 5)
    assert AILMENT.d_wp("Viral-Infection", "CoVid") == Fraction(1, 5)


def test_d_wp_self_is_zero():
    for x in AILMENT.labels:
        assert AILMENT.d_wp(x, x) == 0


def test_deepest_common_ancestor():
    assert AILMENT.deepest_common_ancestor("Flu", "CoVid") == "Viral-Infection"
    assert AILMENT.deepest_common_ancestor("Flu", "Cancer") == "Ailment"
    assert AILMENT.deepest_common_ancestor("Flu", "Viral-Infection") == "Viral-Infection"


def test_ancestry_includes_self():
    assert AILMENT.is_ancestor("CoVid", "CoVid")
    assert AILMENT.is_ancestor("Ailment", "CoVid")
    assert not AILMENT.is_ancestor("CoVid", "Viral-Infection")


def test_path_and_children():
    assert AILMENT.path("Flu") == ["Ailment", "Viral-Infection", "Flu"]
    assert sorted(AILMENT.children("Viral-Infection")) == ["CoVid", "Flu"]


@pytest.mark.parametrize(
    "parent",
    [
        {"a": None, "b": None},
        {"a": "b", "b": "a"},
        {"a": None, "b": "zz"},
    ],
)
def test_malformed_trees_rejected(parent):
    with pytest.raises(TaxonomyError):
        Taxonomy("bad", parent)


def test_unknown_label():
    with pytest.raises(TaxonomyError):
        AILMENT.depth("Measles")


def test_duplicate_label_in_nested_form():
    with pytest.raises(TaxonomyError):
        Taxonomy.from_nested("t", {"r": {"a": {"b": {}}, "c": {"b": {}}}})


def test_equality_is_structural():
    again = Taxonomy.from_nested(
        "Ailment", {"Ailment": {"Viral-Infection": {"CoVid": {}, "Flu": {}}, "Cancer": {}, "Heart-Disease": {}}}
    )
    assert again == AILMENT and hash(again) == hash(AILMENT)


random_parents = st.integers(min_value=1, max_value=40).flatmap(
    lambda n: st.tuples(*[st.integers(0, max(i - 1, 0)) for i in range(n)]).map(
        lambda ps: [-1] + list(ps[1:])
    )
)


@settings(max_examples=60, deadline=None)
@given(random_parents)
def test_distance_matrix_matches_fractions(parents):
    t = Taxonomy.from_parent_array("r", parents)
    num, den = t.distance_matrix()
    for i, x in enumerate(t.labels):
        for j, y in enumerate(t.labels):
            assert Fraction(int(num[i, j]), int(den[i, j])) == t.d_wp(x, y)


def test_distance_matrix_dtype():
    num, den = AILMENT.distance_matrix()
    assert num.dtype == np.int64 and den.dtype == np.int64
