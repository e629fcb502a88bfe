"""Core domain types: sequences, masking, predictions, candidates, traces.

Everything here is an immutable value. Scheduler steps build fresh objects,
so candidates that share a parent can never alias each other's buffers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MissingPrediction, PositionNotMasked

PROB_SUM_TOL = 1e-6


class Mode(enum.Enum):
    """Provenance tag for a candidate's most recent expansion."""

    PARALLEL = "parallel"
    BEAM_SEARCH = "beam_search"
    INIT = "init"


@dataclass(frozen=True)
class Vocabulary:
    """Token id space with one id reserved for the mask."""

    size: int
    mask_id: int

    def __post_init__(self) -> None:
        if self.size < 2:
            raise ValueError(f"vocabulary size must be >= 2, got {self.size}")
        if not 0 <= self.mask_id < self.size:
            raise ValueError(f"mask_id {self.mask_id} outside [0, {self.size})")


@dataclass(frozen=True)
class DecodeState:
    """Token buffer plus the set of still-masked positions.

    ``tokens`` covers the full buffer (prompt followed by the generated
    region). ``masked`` holds ascending indices into the generated region
    only; a position is in ``masked`` iff its token is the mask id.
    """

    prompt_len: int
    tokens: tuple[int, ...]
    masked: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.prompt_len < 0 or self.prompt_len > len(self.tokens):
            raise ValueError("prompt_len outside token buffer")
        if any(self.masked[i] >= self.masked[i + 1] for i in range(len(self.masked) - 1)):
            raise ValueError("masked positions must be strictly ascending")
        if self.masked and (self.masked[0] < self.prompt_len or self.masked[-1] >= len(self.tokens)):
            raise ValueError("masked positions must lie in the generated region")

    @property
    def length(self) -> int:
        """Generated-region length."""
        return len(self.tokens) - self.prompt_len

    def validate_against(self, vocab: Vocabulary) -> None:
        """Check the mask/token correspondence invariant for ``vocab``."""
        masked = set(self.masked)
        for p, t in enumerate(self.tokens):
            if p < self.prompt_len and t == vocab.mask_id:
                raise ValueError(f"prompt position {p} holds the mask id")
            if p >= self.prompt_len and (t == vocab.mask_id) != (p in masked):
                raise ValueError(f"position {p}: token/mask mismatch")


def initial_state(prompt: tuple[int, ...] | list[int], length: int, vocab: Vocabulary) -> DecodeState:
    """Prompt followed by ``length`` masks, all generated positions masked."""
    prompt = tuple(prompt)
    tokens = prompt + (vocab.mask_id,) * length
    masked = tuple(range(len(prompt), len(prompt) + length))
    return DecodeState(prompt_len=len(prompt), tokens=tokens, masked=masked)


@dataclass(frozen=True)
class TokenDistribution:
    """Top-k compressed distribution over the vocabulary for one position.

    ``other_mass`` is the total probability of every token not listed in
    ``top_tokens``; listed probabilities are strictly positive and
    non-increasing, and the whole thing sums to one.
    """

    top_tokens: tuple[int, ...]
    top_probs: tuple[float, ...]
    other_mass: float = 0.0

    def __post_init__(self) -> None:
        if len(self.top_tokens) != len(self.top_probs):
            raise ValueError("top_tokens and top_probs lengths differ")
        if not self.top_tokens:
            raise ValueError("distribution must list at least one token")
        if any(p <= 0.0 or p > 1.0 for p in self.top_probs):
            raise ValueError("listed probabilities must lie in (0, 1]")
        if any(self.top_probs[i] < self.top_probs[i + 1] for i in range(len(self.top_probs) - 1)):
            raise ValueError("top_probs must be non-increasing")
        if self.other_mass < 0.0:
            raise ValueError("other_mass must be non-negative")
        total = math.fsum(self.top_probs) + self.other_mass
        if not (1.0 - PROB_SUM_TOL <= total <= 1.0 + PROB_SUM_TOL):
            raise ValueError(f"distribution sums to {total}, expected 1")

    @property
    def argmax_token(self) -> int:
        return self.top_tokens[0]

    @property
    def max_prob(self) -> float:
        return self.top_probs[0]


@dataclass(frozen=True)
class PredictionMatrix:
    """Per-masked-position distributions returned by one backend call."""

    entries: dict[int, TokenDistribution]

    def positions(self) -> tuple[int, ...]:
        return tuple(sorted(self.entries))


@dataclass(frozen=True)
class DecodedToken:
    """One committed token: where, what, how confident, and when.

    ``confidence`` is the active metric's score at commit time and
    ``max_prob`` the plain top-probability (the two coincide under the
    default metric). ``mask_rank`` is the position's index in the ascending
    masked set snapshotted at the start of its step.
    """

    position: int
    token: int
    confidence: float
    max_prob: float
    step_index: int
    mode: Mode
    mask_rank: int


@dataclass(frozen=True)
class Candidate:
    """A decode state plus its score bookkeeping and provenance."""

    state: DecodeState
    cum_score: float = 0.0
    token_conf_sum: float = 0.0
    steps_taken: int = 0
    last_mode: Mode = Mode.INIT
    decoded: tuple[DecodedToken, ...] = ()

    @property
    def tokens_decoded(self) -> int:
        return len(self.decoded)

    @property
    def ranking_key(self) -> float:
        """Per-token average confidence; zero before anything is decoded."""
        if not self.decoded:
            return 0.0
        return self.token_conf_sum / len(self.decoded)

    @property
    def finished(self) -> bool:
        return not self.state.masked

    def state_key(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Identity used to deduplicate candidates in a pool."""
        return (self.state.tokens, self.state.masked)


def root_candidate(state: DecodeState) -> Candidate:
    return Candidate(state=state)


@dataclass(frozen=True)
class Beam:
    """Ranked candidates with the current and maximum width."""

    candidates: tuple[Candidate, ...]
    max_width: int
    current_width: int

    def __post_init__(self) -> None:
        if not 1 <= self.current_width <= self.max_width:
            raise ValueError("need 1 <= current_width <= max_width")
        if len(self.candidates) > self.current_width:
            raise ValueError("beam holds more candidates than its width")

    @property
    def best(self) -> Candidate:
        return self.candidates[0]


@dataclass(frozen=True)
class CandidateRecord:
    """Per-step trace row for one surviving candidate.

    ``cand_id`` is the candidate's rank in the beam after the step and
    ``parent_id`` its parent's rank in the beam before it. ``unmasked``
    holds (position, token, confidence, max_prob, mask_rank) tuples and is
    empty for a parked candidate that merely re-entered the ranking.
    ``fallback`` marks an adaptive-parallel step that decoded a single
    token because nothing cleared the threshold.
    """

    cand_id: int
    parent_id: int
    mode: Mode
    unmasked: tuple[tuple[int, int, float, float, int], ...]
    fallback: bool = False


@dataclass(frozen=True)
class StepRecord:
    """Full record of one denoising step."""

    step_index: int
    per_candidate: tuple[CandidateRecord, ...]
    forward_passes: int
    beam_width_after: int
    pool_size: int
    top_child_mode: Mode


@dataclass(frozen=True)
class DecodeTrace:
    """The substrate of every diagnostic: all steps plus the winner.

    ``wall_time`` is the only non-deterministic field; trace comparisons
    and serialized traces exclude it.
    """

    records: tuple[StepRecord, ...]
    final_candidate: Candidate
    total_forward_passes: int
    wall_time: float = 0.0

    def deterministic_view(self) -> tuple:
        return (self.records, self.final_candidate, self.total_forward_passes)


def traces_equal(a: DecodeTrace, b: DecodeTrace) -> bool:
    """Equality over every deterministic field (wall time excluded)."""
    return a.deterministic_view() == b.deterministic_view()


def apply_unmask(state: DecodeState, positions, preds: PredictionMatrix) -> DecodeState:
    """Commit the argmax token at each selected position.

    Returns a fresh state; the input is not touched. Every position must
    currently be masked and carry a prediction entry.
    """
    pos = sorted(set(positions))
    if not pos:
        return state
    masked = set(state.masked)
    for p in pos:
        if p not in masked:
            raise PositionNotMasked(f"position {p} is not masked")
        if p not in preds.entries:
            raise MissingPrediction(f"no prediction for position {p}")
    tokens = list(state.tokens)
    for p in pos:
        tokens[p] = preds.entries[p].argmax_token
    selected = set(pos)
    new_masked = tuple(m for m in state.masked if m not in selected)
    return DecodeState(prompt_len=state.prompt_len, tokens=tuple(tokens), masked=new_masked)


def forward_mask(
    tokens,
    rho: float,
    seed: int,
    vocab: Vocabulary,
    prompt_len: int = 0,
) -> DecodeState:
    """Mask a proportion ``rho`` of the generated region, chosen uniformly.

    The masked count is round-half-up of ``rho * length``. Deterministic
    given (tokens, rho, seed); only used to build fixtures, the decode
    loop always starts fully masked.
    """
    tokens = tuple(tokens)
    if any(t == vocab.mask_id for t in tokens):
        raise ValueError("input tokens may not contain the mask id")
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    length = len(tokens) - prompt_len
    count = int(math.floor(rho * length + 0.5))
    rng = np.random.default_rng(seed)
    chosen = rng.choice(length, size=count, replace=False) if count else np.array([], dtype=int)
    masked = tuple(sorted(int(c) + prompt_len for c in chosen))
    buf = list(tokens)
    for p in masked:
        buf[p] = vocab.mask_id
    return DecodeState(prompt_len=prompt_len, tokens=tuple(buf), masked=masked)
