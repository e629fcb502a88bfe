import math

import pytest
from hypothesis import given, settings, strategies as st

from maskbeam.errors import SubsetTooLarge, TooManyCombinations
from maskbeam.subsets import (
    ScoredSubset,
    brute_force_subsets,
    min_candidate_count,
    top_k_subsets,
)


def test_best_first_order_with_tie_break():
    # totals: (0,1)=9, (0,2)=8, then (0,3) and (1,2) tie at 7
    got = top_k_subsets([5.0, 4.0, 3.0, 2.0], n=2, K=4)
    assert [s.indices for s in got] == [(0, 1), (0, 2), (0, 3), (1, 2)]
    assert got[0].total == 9.0


def test_single_position_subsets_are_score_order():
    got = top_k_subsets([0.9, 0.5, 0.1], n=1, K=3)
    assert [s.indices for s in got] == [(0,), (1,), (2,)]
    assert [s.total for s in got] == [0.9, 0.5, 0.1]


def test_k_beyond_available_returns_everything():
    got = top_k_subsets([3.0, 2.0, 1.0], n=2, K=50)
    assert len(got) == math.comb(3, 2)


def test_all_ties_fall_back_to_lexicographic():
    got = top_k_subsets([1.0] * 4, n=2, K=6)
    assert [s.indices for s in got] == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


def test_subset_larger_than_scores_rejected():
    with pytest.raises(SubsetTooLarge):
        top_k_subsets([1.0, 0.5], n=3, K=1)


def test_unsorted_scores_rejected():
    with pytest.raises(ValueError):
        top_k_subsets([0.1, 0.9], n=1, K=1)


def test_brute_force_cap():
    with pytest.raises(TooManyCombinations):
        brute_force_subsets(sorted([float(i) for i in range(40)], reverse=True), n=20, K=1)


class TestMinCandidateCount:
    def test_smallest_m_with_enough_combinations(self):
        # C(3,2)=3 < 4 <= C(4,2)=6
        assert min_candidate_count(10, n=2, K=4) == 4

    def test_capped_at_mask_count(self):
        assert min_candidate_count(3, n=2, K=1000) == 3

    def test_n_of_one(self):
        assert min_candidate_count(10, n=1, K=5) == 5

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            min_candidate_count(0, 1, 1)


@st.composite
def score_lists(draw):
    n = draw(st.integers(min_value=1, max_value=8))
    raw = draw(st.lists(st.floats(0.0, 1.0), min_size=n, max_size=n))
    return sorted(raw, reverse=True)


@settings(max_examples=300)
@given(scores=score_lists(), n=st.integers(1, 4), K=st.integers(1, 20))
def test_heap_search_matches_brute_force(scores, n, K):
    """The frontier search and full enumeration agree exactly, ties included."""
    if n > len(scores):
        with pytest.raises(SubsetTooLarge):
            top_k_subsets(scores, n, K)
        return
    assert top_k_subsets(scores, n, K) == brute_force_subsets(scores, n, K)


def test_scored_subset_is_value_like():
    assert ScoredSubset((0, 1), 1.5) == ScoredSubset((0, 1), 1.5)
