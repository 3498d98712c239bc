"""Model abstraction: anything that yields per-position masked-token marginals.

The recorder treats a model as a black box that, given the generation
region's current tokens (with ``mask_id`` holes), returns one categorical
row over real token ids per masked position. Real token ids are the
model's own ids; the mask sentinel is one past the vocabulary so it can
never collide with a predictable token.
"""

from __future__ import annotations

from typing import Protocol, Sequence

import numpy as np


class UnsupportedModelError(Exception):
    """The requested model cannot serve masked-token marginals."""


class MaskedMarginalModel(Protocol):
    """Contract the recorder drives."""

    vocab_size: int
    mask_id: int
    eos_id: int | None

    def marginals(
        self, tokens: Sequence[int], masked_positions: Sequence[int]
    ) -> np.ndarray:
        """Rows (len(masked_positions), vocab_size), each summing to 1."""
        ...

    def decode_text(self, tokens: Sequence[int]) -> str:
        """Human-readable rendering of generated token ids."""
        ...


def load_model(identifier: str, prompt: str, device: str = "cpu") -> MaskedMarginalModel:
    """Resolve a model identifier.

    ``builtin:char`` is the dependency-free deterministic default; anything
    else is treated as a HuggingFace model id or local path and loaded
    through transformers.
    """
    if identifier == "builtin:char":
        from .builtin import BuiltinCharModel

        return BuiltinCharModel(prompt=prompt)
    from .hf import TransformersMaskedLM

    return TransformersMaskedLM(identifier, prompt=prompt, device=device)
