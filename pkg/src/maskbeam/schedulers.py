"""Decoding strategies over a model backend.

Greedy and fixed/adaptive parallel commit into a single running candidate.
Position beam search (PBS) keeps up to K candidates distinguished by which
positions they committed. The switched controller (SOAR) runs parallel
commits per candidate whenever some position clears the threshold tau and
falls back to single-token PBS expansion otherwise, collapsing the beam to
width 1 after a step whose best child was a parallel commit.

All strategies share one commit path so that configurations which must
produce identical traces (see the reduction identities in the tests) agree
on every float.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass
from collections.abc import Sequence

from .backends import ModelBackend
from .errors import (
    BackendFailure,
    EmptyBeam,
    EmptyPool,
    MissingPrediction,
    NothingMasked,
)
from .metrics import ConfidenceMetric, confidence
from .state import (
    Beam,
    Candidate,
    CandidateRecord,
    DecodedToken,
    DecodeTrace,
    Mode,
    PredictionMatrix,
    StepRecord,
    Vocabulary,
    apply_unmask,
    initial_state,
    root_candidate,
)
from .subsets import min_candidate_count, top_k_subsets


class Strategy(enum.Enum):
    """Available unmasking schedulers. Values double as CLI spellings."""

    GREEDY = "greedy"
    FIXED_PARALLEL = "fixed_parallel"
    ADAPTIVE_PARALLEL = "adaptive_parallel"
    PBS = "pbs"
    SOAR = "soar"


@dataclass(frozen=True)
class DecodeConfig:
    """Strategy choice plus every knob the strategies read.

    ``k_per_step`` applies to Greedy, ``n_parallel`` to FixedParallel and
    parallel-PBS, ``tau`` to AdaptiveParallel and SOAR, ``beam_width`` (the
    paper's K) to PBS and SOAR. ``topk`` is the per-position distribution
    truncation requested from the backend.
    """

    strategy: Strategy
    k_per_step: int = 1
    n_parallel: int = 1
    tau: float = 0.9
    beam_width: int = 1
    metric: ConfidenceMetric = ConfidenceMetric.MAX_PROB
    max_length: int = 32
    seed: int = 0
    topk: int = 8

    def __post_init__(self) -> None:
        if not math.isfinite(self.tau):
            raise ValueError("tau must be finite")
        if self.beam_width < 1 or self.k_per_step < 1 or self.n_parallel < 1:
            raise ValueError("beam_width, k_per_step, n_parallel must be >= 1")
        if self.max_length < 0:
            raise ValueError("max_length must be >= 0")
        if self.topk < 2:
            raise ValueError("topk must be >= 2")


@dataclass(frozen=True)
class ExpandedCandidate:
    """A freshly expanded (or parked) candidate inside one step's pool.

    ``parent_index`` is the parent's rank in the pre-step beam and
    ``unmasked`` the (position, token, confidence, max_prob, mask_rank)
    rows this expansion committed; both feed the documented ranking
    tie-breaks. Parked finished candidates re-enter pools with
    ``fresh=False`` and no rows.
    """

    candidate: Candidate
    step_gain: float
    origin_mode: Mode
    parent_index: int = 0
    unmasked: tuple[tuple[int, int, float, float, int], ...] = ()
    fresh: bool = True
    fallback: bool = False

    @property
    def positions(self) -> tuple[int, ...]:
        return tuple(row[0] for row in self.unmasked)


def _confidences(
    cand: Candidate, preds: PredictionMatrix, metric: ConfidenceMetric, vocab: Vocabulary
) -> list[tuple[int, float]]:
    out = []
    for p in cand.state.masked:
        if p not in preds.entries:
            raise MissingPrediction(f"no prediction for masked position {p}")
        out.append((p, confidence(preds.entries[p], metric, vocab)))
    return out


def _commit(
    cand: Candidate,
    positions: Sequence[int],
    preds: PredictionMatrix,
    metric: ConfidenceMetric,
    vocab: Vocabulary,
    mode: Mode,
) -> tuple[Candidate, float, tuple[tuple[int, int, float, float, int], ...]]:
    """Unmask ``positions`` in one candidate; the single source of all score floats."""
    pos = sorted(positions)
    rank_of = {p: i for i, p in enumerate(cand.state.masked)}
    rows = []
    for p in pos:
        if p not in preds.entries:
            raise MissingPrediction(f"no prediction for position {p}")
        dist = preds.entries[p]
        rows.append((p, dist.argmax_token, confidence(dist, metric, vocab), dist.max_prob, rank_of[p]))
    total = math.fsum(r[2] for r in rows)
    gain = total / len(rows)
    child = Candidate(
        state=apply_unmask(cand.state, pos, preds),
        cum_score=cand.cum_score + gain,
        token_conf_sum=cand.token_conf_sum + total,
        steps_taken=cand.steps_taken + 1,
        last_mode=mode,
        decoded=cand.decoded
        + tuple(
            DecodedToken(
                position=p,
                token=tok,
                confidence=conf,
                max_prob=mp,
                step_index=cand.steps_taken,
                mode=mode,
                mask_rank=rank,
            )
            for p, tok, conf, mp, rank in rows
        ),
    )
    return child, gain, tuple(rows)


def _greedy_children(
    cand: Candidate,
    preds: PredictionMatrix,
    k: int,
    metric: ConfidenceMetric,
    vocab: Vocabulary,
    parent_index: int = 0,
) -> list[ExpandedCandidate]:
    if not cand.state.masked:
        raise NothingMasked("candidate has no masked positions")
    ranked = sorted(_confidences(cand, preds, metric, vocab), key=lambda pc: (-pc[1], pc[0]))
    chosen = [p for p, _ in ranked[: min(k, len(ranked))]]
    mode = Mode.PARALLEL if k > 1 else Mode.BEAM_SEARCH
    child, gain, rows = _commit(cand, chosen, preds, metric, vocab, mode)
    return [ExpandedCandidate(child, gain, mode, parent_index, rows)]


def greedy_step(
    cand: Candidate,
    preds: PredictionMatrix,
    k: int,
    metric: ConfidenceMetric,
    vocab: Vocabulary,
) -> Candidate:
    """Commit the min(k, masked) highest-confidence positions (ties: lower index)."""
    return _greedy_children(cand, preds, k, metric, vocab)[0].candidate


def _adaptive_children(
    cand: Candidate,
    preds: PredictionMatrix,
    tau: float,
    metric: ConfidenceMetric,
    vocab: Vocabulary,
    parent_index: int = 0,
) -> list[ExpandedCandidate]:
    if not cand.state.masked:
        raise NothingMasked("candidate has no masked positions")
    confs = _confidences(cand, preds, metric, vocab)
    high = [p for p, c in confs if c > tau]
    fallback = not high
    if fallback:
        high = [min(confs, key=lambda pc: (-pc[1], pc[0]))[0]]
    child, gain, rows = _commit(cand, high, preds, metric, vocab, Mode.PARALLEL)
    return [ExpandedCandidate(child, gain, Mode.PARALLEL, parent_index, rows, fallback=fallback)]


def adaptive_parallel_step(
    cand: Candidate,
    preds: PredictionMatrix,
    tau: float,
    metric: ConfidenceMetric,
    vocab: Vocabulary,
) -> tuple[Candidate, bool]:
    """Commit every position with confidence > tau, or the single best if none.

    Returns the child and whether the single-token fallback fired.
    """
    exp = _adaptive_children(cand, preds, tau, metric, vocab)[0]
    return exp.candidate, exp.fallback


def pbs_expand(
    cand: Candidate,
    preds: PredictionMatrix,
    n: int,
    K: int,
    metric: ConfidenceMetric,
    vocab: Vocabulary,
    parent_index: int = 0,
) -> list[ExpandedCandidate]:
    """Children committing the top-K size-n position subsets by total confidence.

    Only the min_candidate_count highest-confidence positions enter the
    subset search. When fewer than n positions remain, one child commits
    them all.
    """
    if n < 1 or K < 1:
        raise ValueError("need n >= 1 and K >= 1")
    if not cand.state.masked:
        raise NothingMasked("candidate has no masked positions")
    confs = _confidences(cand, preds, metric, vocab)
    if len(confs) < n:
        child, gain, rows = _commit(cand, [p for p, _ in confs], preds, metric, vocab, Mode.BEAM_SEARCH)
        return [ExpandedCandidate(child, gain, Mode.BEAM_SEARCH, parent_index, rows)]
    m = min_candidate_count(len(confs), n, K)
    ranked = sorted(confs, key=lambda pc: (-pc[1], pc[0]))[:m]
    out = []
    for subset in top_k_subsets([c for _, c in ranked], n, K):
        chosen = [ranked[i][0] for i in subset.indices]
        child, gain, rows = _commit(cand, chosen, preds, metric, vocab, Mode.BEAM_SEARCH)
        out.append(ExpandedCandidate(child, gain, Mode.BEAM_SEARCH, parent_index, rows))
    return out


def soar_expand(
    cand: Candidate,
    preds: PredictionMatrix,
    tau: float,
    K: int,
    metric: ConfidenceMetric,
    vocab: Vocabulary,
    parent_index: int = 0,
) -> list[ExpandedCandidate]:
    """One parallel child over the >tau positions, else K single-token children."""
    if not cand.state.masked:
        raise NothingMasked("candidate has no masked positions")
    confs = _confidences(cand, preds, metric, vocab)
    high = [p for p, c in confs if c > tau]
    if high:
        child, gain, rows = _commit(cand, high, preds, metric, vocab, Mode.PARALLEL)
        return [ExpandedCandidate(child, gain, Mode.PARALLEL, parent_index, rows)]
    return pbs_expand(cand, preds, 1, K, metric, vocab, parent_index)


def rank_pool(pool: Sequence[ExpandedCandidate]) -> list[ExpandedCandidate]:
    """Sort by ranking key, break ties by parent order then position tuple,
    and drop later duplicates of identical (tokens, masked) states."""
    if not pool:
        raise EmptyPool("cannot rank an empty pool")
    ranked = sorted(pool, key=lambda e: (-e.candidate.ranking_key, e.parent_index, e.positions))
    seen: set = set()
    out = []
    for e in ranked:
        key = e.candidate.state_key()
        if key in seen:
            continue
        seen.add(key)
        out.append(e)
    return out


def beam_update(
    pool: Sequence[ExpandedCandidate], width: int, max_width: int | None = None
) -> Beam:
    """Rank, dedup, and truncate a pool into the next beam."""
    if width < 1:
        raise ValueError("width must be >= 1")
    survivors = rank_pool(pool)[:width]
    cap = width if max_width is None else max(max_width, width)
    return Beam(candidates=tuple(e.candidate for e in survivors), max_width=cap, current_width=width)


def soar_step(
    beam: Beam,
    preds_per_candidate: Sequence[PredictionMatrix],
    tau: float,
    K: int,
    metric: ConfidenceMetric,
    vocab: Vocabulary,
) -> Beam:
    """One switched step over a whole beam of unfinished candidates.

    Width collapses to 1 when the pool's top child came from a parallel
    commit and resets to min(K, pool size) otherwise.
    """
    if not beam.candidates:
        raise EmptyBeam("beam has no candidates")
    if len(preds_per_candidate) != len(beam.candidates):
        raise MissingPrediction("predictions not aligned with beam candidates")
    pool: list[ExpandedCandidate] = []
    for i, (cand, preds) in enumerate(zip(beam.candidates, preds_per_candidate)):
        pool.extend(soar_expand(cand, preds, tau, K, metric, vocab, parent_index=i))
    ranked = rank_pool(pool)
    width = 1 if ranked[0].origin_mode is Mode.PARALLEL else min(K, len(pool))
    return Beam(
        candidates=tuple(e.candidate for e in ranked[:width]),
        max_width=max(K, width),
        current_width=width,
    )


def _expand(
    config: DecodeConfig,
    cand: Candidate,
    preds: PredictionMatrix,
    parent_index: int,
    vocab: Vocabulary,
) -> list[ExpandedCandidate]:
    s = config.strategy
    if s is Strategy.GREEDY:
        return _greedy_children(cand, preds, config.k_per_step, config.metric, vocab, parent_index)
    if s is Strategy.FIXED_PARALLEL:
        return _greedy_children(cand, preds, config.n_parallel, config.metric, vocab, parent_index)
    if s is Strategy.ADAPTIVE_PARALLEL:
        return _adaptive_children(cand, preds, config.tau, config.metric, vocab, parent_index)
    if s is Strategy.PBS:
        return pbs_expand(
            cand, preds, config.n_parallel, config.beam_width, config.metric, vocab, parent_index
        )
    return soar_expand(
        cand, preds, config.tau, config.beam_width, config.metric, vocab, parent_index
    )


def _decide_width(config: DecodeConfig, top_fresh: ExpandedCandidate, pool_size: int) -> int:
    if config.strategy in (Strategy.GREEDY, Strategy.FIXED_PARALLEL, Strategy.ADAPTIVE_PARALLEL):
        return 1
    if config.strategy is Strategy.PBS:
        return min(config.beam_width, pool_size)
    if top_fresh.origin_mode is Mode.PARALLEL:
        return 1
    return min(config.beam_width, pool_size)


def decode(
    config: DecodeConfig, backend: ModelBackend, prompt: Sequence[int] = ()
) -> tuple[tuple[int, ...], DecodeTrace]:
    """Run the configured strategy from a fully masked sequence.

    Deterministic given (config, backend, prompt) in every field except
    wall_time. Each step issues one backend prediction per unfinished
    candidate; finished candidates are parked and re-enter the ranking
    with their final key until everything is done.
    """
    vocab = backend.vocabulary()
    cap = config.beam_width if config.strategy in (Strategy.PBS, Strategy.SOAR) else 1
    beam = Beam(
        candidates=(root_candidate(initial_state(tuple(prompt), config.max_length, vocab)),),
        max_width=cap,
        current_width=1,
    )
    records: list[StepRecord] = []
    total_fp = 0
    step = 0
    start = time.perf_counter()
    while any(not c.finished for c in beam.candidates):
        live = [(i, c) for i, c in enumerate(beam.candidates) if not c.finished]
        try:
            preds_list = backend.predict_batch([c.state for _, c in live], config.topk)
        except Exception as exc:
            raise BackendFailure(f"backend failed at step {step}: {exc}") from exc
        if len(preds_list) != len(live):
            raise BackendFailure(
                f"backend returned {len(preds_list)} matrices for {len(live)} states at step {step}"
            )
        preds_by = {i: m for (i, _), m in zip(live, preds_list)}
        pool: list[ExpandedCandidate] = []
        for i, cand in enumerate(beam.candidates):
            if cand.finished:
                pool.append(
                    ExpandedCandidate(cand, 0.0, cand.last_mode, parent_index=i, fresh=False)
                )
            else:
                pool.extend(_expand(config, cand, preds_by[i], i, vocab))
        ranked = rank_pool(pool)
        top_fresh = next(e for e in ranked if e.fresh)
        width = _decide_width(config, top_fresh, len(pool))
        survivors = ranked[:width]
        beam = Beam(
            candidates=tuple(e.candidate for e in survivors),
            max_width=cap,
            current_width=width,
        )
        records.append(
            StepRecord(
                step_index=step,
                per_candidate=tuple(
                    CandidateRecord(
                        cand_id=r,
                        parent_id=e.parent_index,
                        mode=e.origin_mode,
                        unmasked=e.unmasked,
                        fallback=e.fallback,
                    )
                    for r, e in enumerate(survivors)
                ),
                forward_passes=len(live),
                beam_width_after=width,
                pool_size=len(pool),
                top_child_mode=top_fresh.origin_mode,
            )
        )
        total_fp += len(live)
        step += 1
    final = beam.candidates[0]
    trace = DecodeTrace(
        records=tuple(records),
        final_candidate=final,
        total_forward_passes=total_fp,
        wall_time=time.perf_counter() - start,
    )
    return final.state.tokens, trace
