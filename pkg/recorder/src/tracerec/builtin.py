"""Dependency-free deterministic character model for offline recording.

A character-bigram blend over a small built-in corpus plus the prompt.
Nothing about it is a trained language model; it exists so traces can be
recorded and replay-validated on machines with no checkpoints available.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

_CORPUS = (
    "the quick brown fox jumps over the lazy dog. "
    "pack my box with five dozen liquor jugs. "
    "how vexingly quick daft zebras jump. "
    "sphinx of black quartz judge my vow. "
)

_ALPHABET = sorted(set(_CORPUS))


class BuiltinCharModel:
    """Character-level marginals from bigram statistics with smoothing."""

    def __init__(self, prompt: str = ""):
        for ch in prompt:
            if ch not in _ALPHABET:
                raise ValueError(f"prompt character {ch!r} outside the builtin alphabet")
        self.alphabet = list(_ALPHABET)
        self.vocab_size = len(self.alphabet)
        self.mask_id = self.vocab_size
        self.eos_id = self.alphabet.index(".")
        self.prompt = prompt
        self._index = {ch: k for k, ch in enumerate(self.alphabet)}
        text = _CORPUS + prompt
        size = self.vocab_size
        self._unigram = np.ones(size)
        self._after = np.ones((size, size))
        self._before = np.ones((size, size))
        for ch in text:
            self._unigram[self._index[ch]] += 1.0
        for a, b in zip(text, text[1:]):
            self._after[self._index[a], self._index[b]] += 1.0
            self._before[self._index[b], self._index[a]] += 1.0
        self._unigram /= self._unigram.sum()
        self._after /= self._after.sum(axis=1, keepdims=True)
        self._before /= self._before.sum(axis=1, keepdims=True)

    def marginals(
        self, tokens: Sequence[int], masked_positions: Sequence[int]
    ) -> np.ndarray:
        context = [self._index[ch] for ch in self.prompt] + list(tokens)
        offset = len(self.prompt)
        rows = np.zeros((len(masked_positions), self.vocab_size))
        for k, position in enumerate(masked_positions):
            p = position + offset
            left = next(
                (context[q] for q in range(p - 1, -1, -1) if context[q] != self.mask_id),
                None,
            )
            right = next(
                (
                    context[q]
                    for q in range(p + 1, len(context))
                    if context[q] != self.mask_id
                ),
                None,
            )
            row = 0.2 * self._unigram.copy()
            row += 0.4 * (self._after[left] if left is not None else self._unigram)
            row += 0.4 * (self._before[right] if right is not None else self._unigram)
            rows[k] = row / row.sum()
        return rows

    def decode_text(self, tokens: Sequence[int]) -> str:
        return "".join(self.alphabet[tok] for tok in tokens)
