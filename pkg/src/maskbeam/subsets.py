"""Best-first enumeration of the top-K size-n subsets of a score list.

Both enumerators compute subset totals with math.fsum, which is exact and
order-independent, so ties agree bit-for-bit between the heap search and
the brute-force oracle.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from collections.abc import Sequence

from .errors import SubsetTooLarge, TooManyCombinations

BRUTE_FORCE_CAP = 10**6


@dataclass(frozen=True)
class ScoredSubset:
    """A strictly increasing index tuple with its score total."""

    indices: tuple[int, ...]
    total: float


def min_candidate_count(mask_count: int, n: int, K: int) -> int:
    """Smallest m with C(m, n) >= K, capped at mask_count."""
    if n < 1 or K < 1 or mask_count < 1:
        raise ValueError("need n >= 1, K >= 1, mask_count >= 1")
    m = n
    while m < mask_count and math.comb(m, n) < K:
        m += 1
    return min(m, mask_count)


def _check_inputs(scores: Sequence[float], n: int, K: int) -> None:
    if n < 1:
        raise ValueError(f"subset size must be >= 1, got {n}")
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if n > len(scores):
        raise SubsetTooLarge(f"subset size {n} exceeds {len(scores)} scores")
    if any(scores[i] < scores[i + 1] for i in range(len(scores) - 1)):
        raise ValueError("scores must be sorted non-increasing")


def top_k_subsets(scores: Sequence[float], n: int, K: int) -> list[ScoredSubset]:
    """The K largest-total size-n subsets, best first.

    Ties break toward the lexicographically smallest index tuple. Classic
    k-smallest-sums frontier: successors of a subset bump one index right
    into the next free slot, so the frontier stays O(K*n) and large C(len,n)
    spaces are never enumerated.
    """
    _check_inputs(scores, n, K)
    first = tuple(range(n))
    heap = [(-math.fsum(scores[i] for i in first), first)]
    seen = {first}
    out: list[ScoredSubset] = []
    while heap and len(out) < K:
        neg_total, indices = heapq.heappop(heap)
        out.append(ScoredSubset(indices=indices, total=-neg_total))
        for j in range(n):
            bumped = indices[j] + 1
            limit = indices[j + 1] if j + 1 < n else len(scores)
            if bumped >= limit:
                continue
            succ = indices[:j] + (bumped,) + indices[j + 1 :]
            if succ in seen:
                continue
            seen.add(succ)
            heapq.heappush(heap, (-math.fsum(scores[i] for i in succ), succ))
    return out


def brute_force_subsets(scores: Sequence[float], n: int, K: int) -> list[ScoredSubset]:
    """Oracle: enumerate everything, sort, truncate. Capped at 10^6 subsets."""
    _check_inputs(scores, n, K)
    count = math.comb(len(scores), n)
    if count > BRUTE_FORCE_CAP:
        raise TooManyCombinations(f"{count} subsets exceeds the {BRUTE_FORCE_CAP} cap")
    scored = [
        ScoredSubset(indices=c, total=math.fsum(scores[i] for i in c))
        for c in itertools.combinations(range(len(scores)), n)
    ]
    scored.sort(key=lambda s: (-s.total, s.indices))
    return scored[:K]
