"""Seeded stub model, reproducible bit for bit across implementations.

The distribution family is pinned by an arithmetic contract rather than a
shared library, so a client-side twin written independently (in any
language) produces the very same IEEE-754 doubles:

    context   = ",".join(str(t) for t in tokens)
    score(v)  = 1 + int(sha256("stub1|{seed}|{p}|{v}|{context}")[:8] big-endian)
                for every v in [0, vocab_size) except mask_id
    ranking   = by (-score, v)
    k         = min(topk, vocab_size - 1)
    prob(v)   = score(v) / total
    other     = (total - sum of top-k scores) / total

Scores are exact integers; each probability is one correctly-rounded
float division, so equality holds exactly, not approximately.
"""

from __future__ import annotations

from collections.abc import Sequence
from hashlib import sha256

DEFAULT_VOCAB_SIZE = 16
DEFAULT_MASK_ID = 0


def stub_predict(
    tokens: Sequence[int],
    masked: Sequence[int],
    topk: int,
    vocab_size: int = DEFAULT_VOCAB_SIZE,
    mask_id: int = DEFAULT_MASK_ID,
    seed: int = 0,
) -> list[tuple[int, list[int], list[float], float]]:
    """Per masked position: (position, top_tokens, top_probs, other_mass)."""
    context = ",".join(str(t) for t in tokens)
    k = min(topk, vocab_size - 1)
    out = []
    for p in masked:
        scores = {}
        for v in range(vocab_size):
            if v == mask_id:
                continue
            digest = sha256(f"stub1|{seed}|{p}|{v}|{context}".encode()).digest()
            scores[v] = 1 + int.from_bytes(digest[:8], "big")
        order = sorted(scores, key=lambda v: (-scores[v], v))
        total = sum(scores.values())
        top = order[:k]
        top_total = sum(scores[v] for v in top)
        out.append((p, top, [scores[v] / total for v in top], (total - top_total) / total))
    return out
