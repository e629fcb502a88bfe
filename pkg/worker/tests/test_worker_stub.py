"""The worker's stub model honors its arithmetic contract."""

import math

from dlmworker import stub_predict


def rows_for(tokens, masked, topk=4, **kw):
    return stub_predict(tokens, masked, topk, **kw)


def test_same_inputs_give_identical_outputs():
    a = rows_for([3, 1, 0, 0], [2, 3])
    b = rows_for([3, 1, 0, 0], [2, 3])
    assert a == b


def test_rows_follow_the_masked_argument_order():
    rows = rows_for([0, 0, 0, 0], [3, 1])
    assert [p for p, _, _, _ in rows] == [3, 1]


def test_probs_non_increasing_and_normalized():
    for p, toks, probs, other in rows_for([5, 0, 0, 0], [1, 2, 3], topk=6):
        assert all(a >= b for a, b in zip(probs, probs[1:]))
        assert all(0.0 < q <= 1.0 for q in probs)
        assert other >= 0.0
        assert abs(math.fsum(probs) + other - 1.0) < 1e-9


def test_mask_id_is_never_listed():
    rows = rows_for([0, 0], [0, 1], topk=99, vocab_size=16, mask_id=0)
    for _, toks, _, _ in rows:
        assert 0 not in toks


def test_topk_beyond_vocab_truncates_with_zero_other_mass():
    rows = rows_for([0, 0], [1], topk=99, vocab_size=16)
    _, toks, probs, other = rows[0]
    assert len(toks) == 15
    assert other == 0.0


def test_context_changes_the_distribution():
    a = rows_for([3, 1, 0, 0], [2])
    b = rows_for([3, 2, 0, 0], [2])
    assert a != b


def test_seed_changes_the_distribution():
    a = rows_for([3, 1, 0, 0], [2], seed=0)
    b = rows_for([3, 1, 0, 0], [2], seed=1)
    assert a != b


def test_no_masked_positions_means_no_rows():
    assert rows_for([4, 2, 8], []) == []
