"""Masked-LM driver backed by HuggingFace transformers.

Loads any model exposing a masked-LM head and a tokenizer with a mask
token. The full input is ``[prompt tokens] + [generation region]`` plus
whatever special framing the tokenizer prescribes; marginals are read at
the generation positions, with special-token logits removed so rows only
cover predictable ids. The engine-facing mask sentinel is one past the
model vocabulary, leaving real ids identity-mapped.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .model import UnsupportedModelError


class TransformersMaskedLM:
    def __init__(self, identifier: str, prompt: str = "", device: str = "cpu"):
        try:
            import torch
            from transformers import AutoModelForMaskedLM, AutoTokenizer
        except ImportError as exc:
            raise UnsupportedModelError(
                f"transformers/torch are required to load {identifier!r}"
            ) from exc
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(identifier)
            self.model = AutoModelForMaskedLM.from_pretrained(identifier)
        except Exception as exc:
            raise UnsupportedModelError(f"cannot load model {identifier!r}: {exc}") from exc
        if self.tokenizer.mask_token_id is None:
            raise UnsupportedModelError(
                f"model {identifier!r} has no mask token; masked decoding is impossible"
            )
        self._torch = torch
        self.device = device
        self.model.to(device)
        self.model.eval()

        self.vocab_size = int(self.model.config.vocab_size)
        self.mask_id = self.vocab_size
        self.eos_id = self.tokenizer.sep_token_id or self.tokenizer.eos_token_id
        self._model_mask_id = int(self.tokenizer.mask_token_id)
        self._prompt_ids = self.tokenizer(prompt, add_special_tokens=False)["input_ids"] if prompt else []
        self._special_ids = sorted(
            tok for tok in set(self.tokenizer.all_special_ids) if tok is not None
        )

    def _frame(self, tokens: Sequence[int]) -> tuple[list[int], int]:
        """Model input ids plus the offset of the generation region."""
        body = list(self._prompt_ids) + [
            self._model_mask_id if tok == self.mask_id else tok for tok in tokens
        ]
        try:
            framed = list(self.tokenizer.build_inputs_with_special_tokens(body))
        except (AttributeError, NotImplementedError):
            # tokenizer API without framing support: feed the bare body
            framed = list(body)
        # locate the body inside the framed sequence
        for offset in range(len(framed) - len(body) + 1):
            if framed[offset : offset + len(body)] == body:
                return framed, offset + len(self._prompt_ids)
        raise UnsupportedModelError("tokenizer framing rearranged the input ids")

    def marginals(
        self, tokens: Sequence[int], masked_positions: Sequence[int]
    ) -> np.ndarray:
        torch = self._torch
        framed, offset = self._frame(tokens)
        with torch.no_grad():
            input_ids = torch.tensor([framed], dtype=torch.long, device=self.device)
            logits = self.model(input_ids=input_ids).logits[0]
        rows = np.zeros((len(masked_positions), self.vocab_size))
        for k, position in enumerate(masked_positions):
            row_logits = logits[offset + position].double()
            row_logits[self._special_ids] = float("-inf")
            probs = torch.softmax(row_logits, dim=-1).cpu().numpy()
            rows[k] = probs / probs.sum()
        return rows

    def decode_text(self, tokens: Sequence[int]) -> str:
        return self.tokenizer.decode(list(tokens), skip_special_tokens=True)
