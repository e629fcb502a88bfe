"""Confidence metrics, the step score, and sequence-level diagnostics."""

from __future__ import annotations

import enum
import math
from collections.abc import Iterable, Sequence

from .errors import EmptySelection, EmptyTrace, InsufficientTopK, MissingPrediction, NoTokensInScope
from .state import DecodeTrace, Mode, PredictionMatrix, TokenDistribution, Vocabulary


class ConfidenceMetric(enum.Enum):
    """Per-position score extracted from a predicted distribution.

    Values double as the CLI spellings.
    """

    MAX_PROB = "prob"
    MARGIN = "margin"
    NEG_ENTROPY = "negentropy"


def confidence(dist: TokenDistribution, metric: ConfidenceMetric, vocab: Vocabulary) -> float:
    """Score one distribution under the chosen metric.

    MaxProb is the top probability, Margin the top-1/top-2 gap, and
    NegEntropy the (negated) Shannon entropy in nats with ``other_mass``
    spread uniformly over the unlisted tokens, so it lower-bounds the true
    negative entropy and is exact when other_mass is zero.
    """
    if metric is ConfidenceMetric.MAX_PROB:
        return dist.top_probs[0]
    if metric is ConfidenceMetric.MARGIN:
        if len(dist.top_probs) < 2:
            raise InsufficientTopK("margin needs at least two listed probabilities")
        return dist.top_probs[0] - dist.top_probs[1]
    terms = [p * math.log(p) for p in dist.top_probs]
    unlisted = vocab.size - len(dist.top_tokens)
    # guard the quotient, not the mass: other_mass/unlisted can underflow to 0
    share = dist.other_mass / unlisted if unlisted > 0 else 0.0
    if share > 0.0:
        terms.append(dist.other_mass * math.log(share))
    return math.fsum(terms)


def step_score(
    positions: Iterable[int],
    preds: PredictionMatrix,
    metric: ConfidenceMetric,
    vocab: Vocabulary,
) -> float:
    """Mean confidence over the selected positions (the per-step gain)."""
    pos = sorted(set(positions))
    if not pos:
        raise EmptySelection("step score over an empty selection")
    scores = []
    for p in pos:
        if p not in preds.entries:
            raise MissingPrediction(f"no prediction for position {p}")
        scores.append(confidence(preds.entries[p], metric, vocab))
    return math.fsum(scores) / len(scores)


def _find_subsequence(haystack: Sequence[int], needle: Sequence[int]) -> int | None:
    if not needle or len(needle) > len(haystack):
        return None
    first = needle[0]
    for i in range(len(haystack) - len(needle) + 1):
        if haystack[i] == first and tuple(haystack[i : i + len(needle)]) == tuple(needle):
            return i
    return None


def average_confidence(trace: DecodeTrace, delimiter: Sequence[int] | None = None) -> float:
    """Mean top-probability over decoded tokens, optionally cut at a delimiter.

    The delimiter is searched in the final token sequence; only tokens whose
    position precedes its first occurrence count. Uses the plain top
    probability regardless of which metric steered the decode.
    """
    decoded = trace.final_candidate.decoded
    cutoff = None
    if delimiter is not None:
        cutoff = _find_subsequence(trace.final_candidate.state.tokens, delimiter)
    in_scope = [dt for dt in decoded if cutoff is None or dt.position < cutoff]
    if not in_scope:
        raise NoTokensInScope("no decoded tokens before the delimiter")
    return math.fsum(dt.max_prob for dt in in_scope) / len(in_scope)


def global_arness(trace: DecodeTrace, k: int) -> float:
    """Fraction of tokens decoded within the k left-most masked positions.

    Each token is compared against the mask set snapshotted at the start of
    its step, so all tokens of a parallel step share one snapshot.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    decoded = trace.final_candidate.decoded
    if not decoded:
        raise EmptyTrace("trace decoded no tokens")
    ar = sum(1 for dt in decoded if dt.mask_rank < k)
    return ar / len(decoded)


def mode_usage_histogram(
    traces: Iterable[DecodeTrace], bins: int = 20
) -> list[tuple[float, float]]:
    """Share of parallel- vs search-mode tokens per slice of decode progress.

    A token decoded at (1-based) step s of an n-step decode lands in the bin
    covering s/n. Non-empty bins report (parallel, search) fractions summing
    to one; empty bins report (0, 0).
    """
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    parallel = [0] * bins
    search = [0] * bins
    for trace in traces:
        steps = trace.final_candidate.steps_taken
        for dt in trace.final_candidate.decoded:
            frac = (dt.step_index + 1) / steps
            b = min(bins - 1, math.ceil(frac * bins) - 1)
            if dt.mode is Mode.PARALLEL:
                parallel[b] += 1
            else:
                search[b] += 1
    out: list[tuple[float, float]] = []
    for p, s in zip(parallel, search):
        total = p + s
        if total == 0:
            out.append((0.0, 0.0))
        else:
            out.append((p / total, s / total))
    return out
