"""Model backends: the planted synthetic model and the in-process stub.

The planted model serves a known ground-truth sequence with controllable
per-position difficulty, so decode-order quality is measurable: a position
answered too early (before its neighborhood is revealed) leans toward a
designated distractor token, answered late it leans toward the target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from collections.abc import Sequence
from typing import Protocol

import numpy as np

from .errors import LengthMismatch
from .state import DecodeState, PredictionMatrix, TokenDistribution, Vocabulary
from .stubmodel import DEFAULT_MASK_ID, DEFAULT_VOCAB_SIZE, stub_predict


class ModelBackend(Protocol):
    """What schedulers need from a model."""

    def vocabulary(self) -> Vocabulary: ...

    def predict_batch(self, states: Sequence[DecodeState], topk: int) -> list[PredictionMatrix]: ...


@dataclass(frozen=True)
class PlantedModelParams:
    """Knobs of the planted model.

    P(target at i) = clamp(alpha + beta*r_i - gamma*d_i, eps, 1-eps) where
    r_i is the revealed fraction of the window around i and d_i the planted
    difficulty; the distractor takes ``distractor_share`` of the remainder.
    """

    vocab_size: int = 64
    length: int = 32
    window: int = 3
    alpha: float = 0.2
    beta: float = 0.75
    gamma: float = 0.6
    eps: float = 0.02
    distractor_share: float = 0.9
    seed: int = 0
    topk: int = 8

    def __post_init__(self) -> None:
        if not 0.0 < self.eps < 0.5:
            raise ValueError("need 0 < eps < 0.5")
        if self.alpha + self.beta > 1.0 - self.eps:
            raise ValueError("need alpha + beta <= 1 - eps")
        if self.vocab_size < 3:
            raise ValueError("vocab_size must be >= 3")
        if not 0.0 < self.distractor_share < 1.0:
            raise ValueError("distractor_share must lie in (0, 1)")
        if self.window < 0 or self.length < 1 or self.topk < 1:
            raise ValueError("window >= 0, length >= 1, topk >= 1 required")


@dataclass(frozen=True)
class PlantedInstance:
    """Ground truth: target tokens, difficulties, and distractor tokens."""

    target: tuple[int, ...]
    difficulty: tuple[float, ...]
    distractor: tuple[int, ...]

    def __post_init__(self) -> None:
        if not len(self.target) == len(self.difficulty) == len(self.distractor):
            raise ValueError("target, difficulty, distractor lengths differ")
        if any(z == y for y, z in zip(self.target, self.distractor)):
            raise ValueError("distractor must differ from target")
        if any(d < 0.0 or d > 1.0 for d in self.difficulty):
            raise ValueError("difficulties must lie in [0, 1]")


def _planted_ids(rng: np.random.Generator, params: PlantedModelParams):
    """Target and distractor id arrays for one instance (mask id 0 excluded)."""
    v = params.vocab_size
    target = rng.integers(1, v, size=params.length)
    # Uniform over [1, v) minus the target id, via a skip map.
    raw = rng.integers(1, v - 1, size=params.length)
    distractor = np.where(raw >= target, raw + 1, raw)
    return target, distractor


def _as_instance(target, difficulty, distractor) -> PlantedInstance:
    return PlantedInstance(
        target=tuple(int(t) for t in target),
        difficulty=tuple(float(d) for d in difficulty),
        distractor=tuple(int(z) for z in distractor),
    )


def generate_instance(
    params: PlantedModelParams,
    easy_share: float = 0.55,
    easy_range: tuple[float, float] = (0.0, 0.04),
    trap_range: tuple[float, float] = (0.65, 0.71),
) -> PlantedInstance:
    """Draw a two-band ("basin") instance from the seeded generator.

    Positions are independently easy or hard.  With the default bands the
    hard positions sit past the point where even a fully revealed window
    leaves the distractor ahead, so early commitments there stay wrong and
    an order that defers them buys nothing on that position alone; the
    value of search comes from keeping the easy majority clean.
    """
    rng = np.random.default_rng(params.seed)
    target, distractor = _planted_ids(rng, params)
    is_easy = rng.random(params.length) < easy_share
    easy = rng.uniform(*easy_range, size=params.length)
    trap = rng.uniform(*trap_range, size=params.length)
    difficulty = np.where(is_easy, easy, trap)
    return _as_instance(target, difficulty, distractor)


def generate_run_instance(
    params: PlantedModelParams,
    n_runs: int = 2,
    run_len: int = 3,
    easy_high: float = 0.008,
    edge_range: tuple[float, float] = (0.748, 0.778),
    interior_range: tuple[float, float] = (0.780, 0.808),
    final_range: tuple[float, float] = (0.070, 0.080),
) -> PlantedInstance:
    """Draw a "plateau" instance: near-free positions plus planted trap runs.

    Each run is a block of consecutive hard positions whose interior is
    strictly harder than its edges, so clearing a run from the outside in
    is the best order by any measure.  Runs are placed away from the
    sequence ends and from each other, and the last position is pinned to
    a mild band so its clipped window cannot turn it into a stray trap.
    """
    if params.length < 2 * run_len + 5:
        raise ValueError("length too short for the requested runs")
    rng = np.random.default_rng(params.seed)
    target, distractor = _planted_ids(rng, params)
    difficulty = rng.uniform(0.0, easy_high, size=params.length)
    starts: list[int] = []
    attempts = 0
    # Rejection-sample run starts; spacing keeps runs from merging.
    while len(starts) < n_runs and attempts < 200:
        s = int(rng.integers(2, params.length - run_len - 2))
        if all(abs(s - t) >= run_len + 2 for t in starts):
            starts.append(s)
        attempts += 1
    for s in starts:
        for j in range(run_len):
            band = interior_range if 0 < j < run_len - 1 else edge_range
            difficulty[s + j] = rng.uniform(*band)
    difficulty[params.length - 1] = rng.uniform(*final_range)
    return _as_instance(target, difficulty, distractor)


def planted_predict(
    instance: PlantedInstance,
    params: PlantedModelParams,
    state: DecodeState,
    topk: int | None = None,
) -> PredictionMatrix:
    """Top-k compressed predictions for every masked position of ``state``.

    r_i counts revealed positions in the window [i-w, i+w] minus i itself,
    clipped at the buffer boundaries; prompt positions count as revealed.
    """
    if state.length != len(instance.target):
        raise LengthMismatch(
            f"state length {state.length} vs instance length {len(instance.target)}"
        )
    k = min(params.topk if topk is None else topk, params.vocab_size)
    total_len = len(state.tokens)
    masked_set = set(state.masked)
    revealed = np.ones(total_len, dtype=np.int64)
    for p in masked_set:
        revealed[p] = 0
    cum = np.concatenate(([0], np.cumsum(revealed)))
    w = params.window
    entries: dict[int, TokenDistribution] = {}
    for p in state.masked:
        lo = max(0, p - w)
        hi = min(total_len - 1, p + w)
        span = hi - lo  # window minus the position itself
        r = (cum[hi + 1] - cum[lo]) / span if span > 0 else 0.0
        g = p - state.prompt_len
        s = min(max(params.alpha + params.beta * r - params.gamma * instance.difficulty[g], params.eps), 1.0 - params.eps)
        probs = np.full(
            params.vocab_size,
            (1.0 - s) * (1.0 - params.distractor_share) / (params.vocab_size - 2),
        )
        probs[instance.target[g]] = s
        probs[instance.distractor[g]] = (1.0 - s) * params.distractor_share
        order = np.argsort(-probs, kind="stable")
        top = order[:k]
        entries[p] = TokenDistribution(
            top_tokens=tuple(int(t) for t in top),
            top_probs=tuple(float(probs[t]) for t in top),
            other_mass=math.fsum(float(probs[t]) for t in order[k:]),
        )
    return PredictionMatrix(entries=entries)


@dataclass(frozen=True)
class PlantedBackend:
    """ModelBackend view of one planted instance (mask id 0)."""

    instance: PlantedInstance
    params: PlantedModelParams

    def vocabulary(self) -> Vocabulary:
        return Vocabulary(size=self.params.vocab_size, mask_id=0)

    def predict_batch(self, states: Sequence[DecodeState], topk: int) -> list[PredictionMatrix]:
        return [planted_predict(self.instance, self.params, s, topk) for s in states]


@dataclass(frozen=True)
class StubBackend:
    """ModelBackend over the hash-seeded stub (see stubmodel)."""

    vocab_size: int = DEFAULT_VOCAB_SIZE
    mask_id: int = DEFAULT_MASK_ID
    seed: int = 0

    def vocabulary(self) -> Vocabulary:
        return Vocabulary(size=self.vocab_size, mask_id=self.mask_id)

    def predict_batch(self, states: Sequence[DecodeState], topk: int) -> list[PredictionMatrix]:
        out = []
        for state in states:
            rows = stub_predict(
                state.tokens, state.masked, topk, self.vocab_size, self.mask_id, self.seed
            )
            out.append(
                PredictionMatrix(
                    entries={
                        p: TokenDistribution(
                            top_tokens=tuple(toks), top_probs=tuple(probs), other_mass=other
                        )
                        for p, toks, probs, other in rows
                    }
                )
            )
        return out
