"""Hash-seeded stub model with an exactly reproducible arithmetic contract.

Scores are derived from sha256 over (seed, position, token, full context),
so any independent implementation in any language can match this one
bit for bit. The contract, fixed forever:

    context   = ",".join(str(t) for t in tokens)
    score(v)  = 1 + int(sha256("stub1|{seed}|{p}|{v}|{context}")[:8] big-endian)
                for every v in [0, vocab_size) except mask_id
    ranking   = by (-score, v)
    k         = min(topk, vocab_size - 1)
    prob(v)   = score(v) / total          (exact integer division to float)
    other     = (total - sum of top-k scores) / total

Probabilities are each a single correctly-rounded float division of exact
integers, so two conforming implementations produce identical IEEE-754
doubles, not merely close ones.
"""

from __future__ import annotations

import hashlib
from collections.abc import Sequence

DEFAULT_VOCAB_SIZE = 16
DEFAULT_MASK_ID = 0


def _score(seed: int, position: int, token: int, context: str) -> int:
    payload = f"stub1|{seed}|{position}|{token}|{context}".encode()
    return 1 + int.from_bytes(hashlib.sha256(payload).digest()[:8], "big")


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
        scored = sorted(
            ((_score(seed, p, v, context), v) for v in range(vocab_size) if v != mask_id),
            key=lambda sv: (-sv[0], sv[1]),
        )
        total = sum(s for s, _ in scored)
        top = scored[:k]
        top_total = sum(s for s, _ in top)
        out.append(
            (
                p,
                [v for _, v in top],
                [s / total for s, _ in top],
                (total - top_total) / total,
            )
        )
    return out
