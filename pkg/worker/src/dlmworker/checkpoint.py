"""Adapter seam for serving a real diffusion-LM checkpoint.

The server only ever calls the two methods below, so wiring in an actual
model means implementing them and nothing else. Kept as an interface stub
on purpose: checkpoints of useful size need a tensor runtime and GPU
memory this package deliberately does not depend on.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Sequence


class CheckpointModel(ABC):
    """What a checkpoint-backed model must provide.

    Shape contract for ``predict``: the model runs one forward pass over
    the full token buffer (length T, mask token at every position listed
    in ``masked``) and softmaxes the logits of the masked rows only,
    giving a [M, vocab_size] probability matrix whose row i corresponds
    to masked[i]. Each row is then top-k compressed: the k highest
    probabilities with ties broken by lower token id, remaining mass
    summed into other_mass. Row order in the result must follow the
    ``masked`` argument.
    """

    @abstractmethod
    def vocab(self) -> tuple[int, int]:
        """(vocab_size, mask_id) of the checkpoint's tokenizer."""

    @abstractmethod
    def predict(
        self, tokens: Sequence[int], masked: Sequence[int], topk: int
    ) -> list[tuple[int, list[int], list[float], float]]:
        """Per masked position: (position, top_tokens, top_probs, other_mass)."""


def load_checkpoint(path: str) -> CheckpointModel:
    """Load a checkpoint adapter; only the seam exists here.

    The hosted environment runs stub mode only. A real deployment
    subclasses CheckpointModel around its runtime of choice and returns
    an instance from here.
    """
    raise NotImplementedError(
        f"no checkpoint adapter is bundled (got {path!r}); "
        "subclass CheckpointModel and construct it here"
    )
