import math

import pytest

from maskbeam.backends import PlantedBackend, PlantedModelParams, generate_instance
from maskbeam.bench import bench_backend, bench_prompt
from maskbeam.errors import (
    BackendFailure,
    EmptyPool,
    MissingPrediction,
    NothingMasked,
)
from maskbeam.metrics import ConfidenceMetric
from maskbeam.schedulers import (
    DecodeConfig,
    ExpandedCandidate,
    Strategy,
    adaptive_parallel_step,
    beam_update,
    decode,
    greedy_step,
    pbs_expand,
    rank_pool,
    soar_expand,
    soar_step,
)
from maskbeam.state import (
    Beam,
    Mode,
    PredictionMatrix,
    TokenDistribution,
    Vocabulary,
    initial_state,
    root_candidate,
    traces_equal,
)

VOCAB = Vocabulary(size=16, mask_id=0)
METRIC = ConfidenceMetric.MAX_PROB


class TableBackend:
    """Fixed per-position confidence regardless of context.

    Positions absent from the table get a floor confidence so they never
    win a selection but still satisfy the full-coverage prediction rule.
    """

    def __init__(self, conf_by_pos, vocab_size=16, floor=0.01):
        self.conf_by_pos = dict(conf_by_pos)
        self.vocab_size = vocab_size
        self.floor = floor

    def vocabulary(self):
        return Vocabulary(size=self.vocab_size, mask_id=0)

    def matrix(self, state):
        entries = {}
        for p in state.masked:
            c = self.conf_by_pos.get(p, self.floor)
            entries[p] = TokenDistribution(top_tokens=(1,), top_probs=(c,), other_mass=1.0 - c)
        return PredictionMatrix(entries=entries)

    def predict_batch(self, states, topk):
        return [self.matrix(s) for s in states]


def cand_and_preds(conf_by_pos, length=None):
    backend = TableBackend(conf_by_pos)
    length = length if length is not None else len(conf_by_pos)
    cand = root_candidate(initial_state((), length, VOCAB))
    return cand, backend.matrix(cand.state)


class TestGreedyStep:
    def test_commits_single_highest_confidence(self):
        cand, preds = cand_and_preds({0: 0.5, 1: 0.9, 2: 0.7})
        child = greedy_step(cand, preds, 1, METRIC, VOCAB)
        assert [d.position for d in child.decoded] == [1]
        assert child.state.masked == (0, 2)
        assert child.last_mode is Mode.BEAM_SEARCH

    def test_tie_prefers_lower_position(self):
        cand, preds = cand_and_preds({0: 0.8, 1: 0.8})
        child = greedy_step(cand, preds, 1, METRIC, VOCAB)
        assert [d.position for d in child.decoded] == [0]

    def test_k_of_two_commits_two(self):
        cand, preds = cand_and_preds({0: 0.5, 1: 0.9, 2: 0.7})
        child = greedy_step(cand, preds, 2, METRIC, VOCAB)
        assert {d.position for d in child.decoded} == {1, 2}
        assert child.last_mode is Mode.PARALLEL

    def test_k_beyond_masked_commits_all(self):
        cand, preds = cand_and_preds({0: 0.5, 1: 0.9})
        child = greedy_step(cand, preds, 5, METRIC, VOCAB)
        assert child.finished

    def test_nothing_masked_rejected(self):
        cand, preds = cand_and_preds({0: 0.5}, length=1)
        done = greedy_step(cand, preds, 1, METRIC, VOCAB)
        with pytest.raises(NothingMasked):
            greedy_step(done, preds, 1, METRIC, VOCAB)

    def test_bookkeeping_totals(self):
        cand, preds = cand_and_preds({0: 0.5, 1: 0.9, 2: 0.7})
        child = greedy_step(cand, preds, 3, METRIC, VOCAB)
        assert child.token_conf_sum == pytest.approx(2.1)
        assert child.cum_score == pytest.approx(2.1 / 3)
        assert child.steps_taken == 1
        assert child.ranking_key == pytest.approx(0.7)


class TestAdaptiveParallelStep:
    def test_commits_everything_above_tau(self):
        cand, preds = cand_and_preds({0: 0.8, 1: 0.75, 2: 0.5})
        child, fallback = adaptive_parallel_step(cand, preds, 0.7, METRIC, VOCAB)
        assert not fallback
        assert {d.position for d in child.decoded} == {0, 1}
        assert child.last_mode is Mode.PARALLEL

    def test_falls_back_to_single_best(self):
        cand, preds = cand_and_preds({0: 0.8, 1: 0.75, 2: 0.5})
        child, fallback = adaptive_parallel_step(cand, preds, 0.9, METRIC, VOCAB)
        assert fallback
        assert [d.position for d in child.decoded] == [0]

    def test_exactly_tau_does_not_clear(self):
        cand, preds = cand_and_preds({0: 0.8, 1: 0.5})
        child, fallback = adaptive_parallel_step(cand, preds, 0.8, METRIC, VOCAB)
        assert fallback


class TestPbsExpand:
    def test_single_token_children_in_confidence_order(self):
        cand, preds = cand_and_preds({0: 0.5, 1: 0.9, 2: 0.7})
        children = pbs_expand(cand, preds, 1, 3, METRIC, VOCAB)
        assert [c.positions for c in children] == [(1,), (2,), (0,)]
        assert all(c.origin_mode is Mode.BEAM_SEARCH for c in children)

    def test_fewer_positions_than_n_commits_all(self):
        cand, preds = cand_and_preds({0: 0.5, 1: 0.9})
        children = pbs_expand(cand, preds, 3, 4, METRIC, VOCAB)
        assert len(children) == 1
        assert children[0].candidate.finished

    def test_subset_children_rank_by_total(self):
        cand, preds = cand_and_preds({0: 0.9, 1: 0.8, 2: 0.1})
        children = pbs_expand(cand, preds, 2, 2, METRIC, VOCAB)
        assert children[0].positions == (0, 1)
        assert children[0].step_gain == pytest.approx((0.9 + 0.8) / 2)

    def test_invalid_widths_rejected(self):
        cand, preds = cand_and_preds({0: 0.5})
        with pytest.raises(ValueError):
            pbs_expand(cand, preds, 0, 1, METRIC, VOCAB)


class TestSoarExpand:
    def test_above_tau_yields_one_parallel_child(self):
        cand, preds = cand_and_preds({0: 0.95, 1: 0.92, 2: 0.5})
        children = soar_expand(cand, preds, 0.9, 3, METRIC, VOCAB)
        assert len(children) == 1
        assert children[0].origin_mode is Mode.PARALLEL
        assert children[0].positions == (0, 1)

    def test_below_tau_yields_beam_children(self):
        cand, preds = cand_and_preds({0: 0.6, 1: 0.5, 2: 0.4})
        children = soar_expand(cand, preds, 0.9, 2, METRIC, VOCAB)
        assert len(children) == 2
        assert all(c.origin_mode is Mode.BEAM_SEARCH for c in children)
        assert all(len(c.positions) == 1 for c in children)


class TestRankPool:
    @staticmethod
    def expanded(conf, positions, parent=0, length=4):
        backend = TableBackend({p: conf for p in positions})
        cand = root_candidate(initial_state((), length, VOCAB))
        children = pbs_expand(
            cand, backend.matrix(cand.state), len(positions), 1, METRIC, VOCAB, parent
        )
        return children[0]

    def test_orders_by_token_average(self):
        lo = self.expanded(0.4, [0])
        hi = self.expanded(0.9, [1])
        assert rank_pool([lo, hi]) == [hi, lo]

    def test_tie_breaks_by_parent_then_positions(self):
        a = self.expanded(0.5, [1], parent=1)
        b = self.expanded(0.5, [0], parent=0)
        c = self.expanded(0.5, [2], parent=0)
        ranked = rank_pool([a, b, c])
        assert [e.positions for e in ranked] == [(0,), (2,), (1,)]

    def test_duplicate_states_collapse(self):
        a = self.expanded(0.5, [0])
        b = self.expanded(0.5, [0])
        assert len(rank_pool([a, b])) == 1

    def test_empty_pool_rejected(self):
        with pytest.raises(EmptyPool):
            rank_pool([])


class TestBeamUpdate:
    def test_truncates_to_width(self):
        pool = [TestRankPool.expanded(c, [p]) for p, c in enumerate((0.9, 0.5, 0.1))]
        beam = beam_update(pool, width=2)
        assert len(beam.candidates) == 2
        assert beam.current_width == 2

    def test_width_must_be_positive(self):
        with pytest.raises(ValueError):
            beam_update([TestRankPool.expanded(0.5, [0])], width=0)


class TestSoarStep:
    def test_parallel_top_collapses_width(self):
        backend = TableBackend({0: 0.95, 1: 0.94, 2: 0.3})
        beam = Beam(
            candidates=(root_candidate(initial_state((), 3, VOCAB)),),
            max_width=2,
            current_width=1,
        )
        out = soar_step(beam, [backend.matrix(beam.best.state)], 0.9, 2, METRIC, VOCAB)
        assert out.current_width == 1
        assert out.best.last_mode is Mode.PARALLEL

    def test_search_top_restores_width(self):
        backend = TableBackend({0: 0.6, 1: 0.5, 2: 0.3})
        beam = Beam(
            candidates=(root_candidate(initial_state((), 3, VOCAB)),),
            max_width=2,
            current_width=1,
        )
        out = soar_step(beam, [backend.matrix(beam.best.state)], 0.9, 2, METRIC, VOCAB)
        assert out.current_width == 2

    def test_misaligned_predictions_rejected(self):
        beam = Beam(
            candidates=(root_candidate(initial_state((), 2, VOCAB)),),
            max_width=1,
            current_width=1,
        )
        with pytest.raises(MissingPrediction):
            soar_step(beam, [], 0.9, 2, METRIC, VOCAB)


def bench_pair(seed, length):
    backend = bench_backend(seed, length)
    return backend, bench_prompt(seed, backend.vocabulary().size)


class TestDecode:
    def test_greedy_one_pass_per_token(self):
        backend, prompt = bench_pair(7, 12)
        tokens, tr = decode(DecodeConfig(strategy=Strategy.GREEDY, max_length=12), backend, prompt)
        assert tr.total_forward_passes == 12
        assert len(tr.records) == 12
        assert len(tr.final_candidate.decoded) == 12
        assert tokens[: len(prompt)] == prompt
        tr.final_candidate.state.validate_against(backend.vocabulary())

    def test_fixed_parallel_halves_the_steps(self):
        backend, prompt = bench_pair(7, 12)
        cfg = DecodeConfig(strategy=Strategy.FIXED_PARALLEL, n_parallel=2, max_length=12)
        _, tr = decode(cfg, backend, prompt)
        assert tr.total_forward_passes == 6
        assert all(r.top_child_mode is Mode.PARALLEL for r in tr.records)

    def test_adaptive_with_zero_tau_finishes_in_one_step(self):
        backend, prompt = bench_pair(7, 12)
        cfg = DecodeConfig(strategy=Strategy.ADAPTIVE_PARALLEL, tau=0.0, max_length=12)
        _, tr = decode(cfg, backend, prompt)
        assert tr.total_forward_passes == 1
        assert not tr.records[0].per_candidate[0].fallback

    def test_adaptive_with_impossible_tau_falls_back_every_step(self):
        backend, prompt = bench_pair(7, 12)
        cfg = DecodeConfig(strategy=Strategy.ADAPTIVE_PARALLEL, tau=1.1, max_length=12)
        _, tr = decode(cfg, backend, prompt)
        assert tr.total_forward_passes == 12
        assert all(r.per_candidate[0].fallback for r in tr.records)

    def test_pbs_forward_pass_identity(self):
        # width-1 first step then width 2: 1 + 2*(L-1) passes
        backend, prompt = bench_pair(0, 16)
        cfg = DecodeConfig(strategy=Strategy.PBS, beam_width=2, max_length=16)
        _, tr = decode(cfg, backend, prompt)
        assert tr.total_forward_passes == 31

    def test_pbs_width_one_reduces_to_greedy(self):
        backend, prompt = bench_pair(3, 10)
        _, tr_g = decode(DecodeConfig(strategy=Strategy.GREEDY, max_length=10), backend, prompt)
        _, tr_p = decode(
            DecodeConfig(strategy=Strategy.PBS, beam_width=1, max_length=10), backend, prompt
        )
        assert traces_equal(tr_g, tr_p)

    def test_soar_with_unreachable_tau_reduces_to_pbs(self):
        backend, prompt = bench_pair(3, 10)
        cfg_s = DecodeConfig(strategy=Strategy.SOAR, tau=1.1, beam_width=2, max_length=10)
        cfg_p = DecodeConfig(strategy=Strategy.PBS, beam_width=2, max_length=10)
        _, tr_s = decode(cfg_s, backend, prompt)
        _, tr_p = decode(cfg_p, backend, prompt)
        assert traces_equal(tr_s, tr_p)

    def test_soar_with_zero_tau_is_one_parallel_wave(self):
        backend, prompt = bench_pair(3, 10)
        cfg = DecodeConfig(strategy=Strategy.SOAR, tau=0.0, beam_width=2, max_length=10)
        _, tr = decode(cfg, backend, prompt)
        assert tr.total_forward_passes == 1
        assert len(tr.records) == 1

    def test_zero_length_decodes_nothing(self):
        backend, prompt = bench_pair(3, 10)
        tokens, tr = decode(DecodeConfig(strategy=Strategy.GREEDY, max_length=0), backend, prompt)
        assert tokens == prompt
        assert tr.records == ()
        assert tr.total_forward_passes == 0

    def test_deterministic_given_config_and_backend(self):
        backend, prompt = bench_pair(5, 12)
        cfg = DecodeConfig(strategy=Strategy.SOAR, tau=0.9, beam_width=2, max_length=12)
        _, a = decode(cfg, backend, prompt)
        _, b = decode(cfg, backend, prompt)
        assert traces_equal(a, b)

    def test_token_conf_sum_matches_decoded_rows(self):
        backend, prompt = bench_pair(9, 12)
        cfg = DecodeConfig(strategy=Strategy.SOAR, tau=0.9, beam_width=2, max_length=12)
        _, tr = decode(cfg, backend, prompt)
        final = tr.final_candidate
        assert final.token_conf_sum == pytest.approx(
            math.fsum(d.confidence for d in final.decoded), abs=1e-12
        )

    def test_margin_metric_decodes_cleanly(self):
        backend, prompt = bench_pair(2, 8)
        cfg = DecodeConfig(
            strategy=Strategy.PBS, beam_width=2, max_length=8, metric=ConfidenceMetric.MARGIN
        )
        _, tr = decode(cfg, backend, prompt)
        assert len(tr.final_candidate.decoded) == 8

    def test_negentropy_metric_decodes_cleanly(self):
        backend, prompt = bench_pair(2, 8)
        cfg = DecodeConfig(
            strategy=Strategy.SOAR, beam_width=2, max_length=8, metric=ConfidenceMetric.NEG_ENTROPY
        )
        _, tr = decode(cfg, backend, prompt)
        assert len(tr.final_candidate.decoded) == 8


class TestDecodeFailures:
    class ExplodingBackend:
        def vocabulary(self):
            return VOCAB

        def predict_batch(self, states, topk):
            raise RuntimeError("boom")

    class MiscountingBackend:
        def vocabulary(self):
            return VOCAB

        def predict_batch(self, states, topk):
            return []

    def test_backend_exception_is_wrapped_with_step(self):
        with pytest.raises(BackendFailure, match="step 0"):
            decode(DecodeConfig(strategy=Strategy.GREEDY, max_length=4), self.ExplodingBackend())

    def test_backend_miscount_is_rejected(self):
        with pytest.raises(BackendFailure, match="matrices"):
            decode(DecodeConfig(strategy=Strategy.GREEDY, max_length=4), self.MiscountingBackend())


class TestDecodeConfigValidation:
    def test_tau_must_be_finite(self):
        with pytest.raises(ValueError):
            DecodeConfig(strategy=Strategy.SOAR, tau=float("nan"))

    def test_widths_must_be_positive(self):
        with pytest.raises(ValueError):
            DecodeConfig(strategy=Strategy.PBS, beam_width=0)

    def test_topk_needs_two_entries(self):
        with pytest.raises(ValueError):
            DecodeConfig(strategy=Strategy.GREEDY, topk=1)

    def test_negative_length_rejected(self):
        with pytest.raises(ValueError):
            DecodeConfig(strategy=Strategy.GREEDY, max_length=-1)
