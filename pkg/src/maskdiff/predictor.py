"""Marginal predictors: the pluggable model contract plus three implementations.

A predictor estimates, for every masked position of a state, a categorical
distribution over the real vocabulary. The contract every implementation
honors is strict determinism: identical (state, step) queries return
identical rows regardless of call history or batch context. Forward calls
are metered by an :class:`NfeCounter` where a whole batch costs one call.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import SequenceState, Vocabulary
from .errors import ContractViolation, MaskdiffError, TraceFormatError, TraceMissError
from .trace import TraceFile, canonical_state_key, fnv1a64_bytes

__all__ = [
    "MarginalEstimate",
    "NfeCounter",
    "MarginalPredictor",
    "TablePredictor",
    "NgramPredictor",
    "ReplayPredictor",
    "RecordingPredictor",
    "make_table_predictor",
    "make_ngram_predictor",
    "open_replay_predictor",
    "categorical_draw",
    "fnv1a64",
]

_ROW_TOLERANCE = 1e-9
_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15


def fnv1a64(values: Sequence[int]) -> int:
    """FNV-1a fold over the little-endian 8-byte encodings of ``values``."""
    return fnv1a64_bytes(b"".join((v & _MASK64).to_bytes(8, "little") for v in values))


def _mix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer, vectorized over uint64 arrays."""
    x = x.astype(np.uint64, copy=True)
    x ^= x >> np.uint64(30)
    x *= np.uint64(0xBF58476D1CE4E5B9)
    x ^= x >> np.uint64(27)
    x *= np.uint64(0x94D049BB133111EB)
    x ^= x >> np.uint64(31)
    return x


def categorical_draw(row: np.ndarray, u: float) -> int:
    """Inverse-CDF draw over ascending token ids: one uniform, one token."""
    cum = np.cumsum(row)
    idx = int(np.searchsorted(cum, u, side="right"))
    return min(idx, len(row) - 1)


@dataclass(frozen=True, eq=False)
class MarginalEstimate:
    """Per-position categorical rows over real token ids.

    ``rows[k]`` is the distribution for ``positions[k]``; rows exist exactly
    for the masked positions of the queried state and each sums to 1 within
    1e-9.
    """

    positions: tuple[int, ...]
    rows: np.ndarray
    _index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.rows.ndim != 2 or self.rows.shape[0] != len(self.positions):
            raise ContractViolation("rows must be a (num_positions, vocab_size) matrix")
        sums = self.rows.sum(axis=1)
        if not np.all(np.abs(sums - 1.0) <= _ROW_TOLERANCE):
            worst = float(np.max(np.abs(sums - 1.0)))
            raise ContractViolation(f"estimate rows must sum to 1 (worst error {worst:.3e})")
        if np.any(self.rows < 0.0):
            raise ContractViolation("estimate rows must be non-negative")
        self.rows.setflags(write=False)
        self._index.update({p: k for k, p in enumerate(self.positions)})

    def row(self, position: int) -> np.ndarray:
        try:
            return self.rows[self._index[position]]
        except KeyError:
            raise ContractViolation(f"estimate has no row for position {position}") from None

    def covers(self, positions: Sequence[int]) -> bool:
        return set(self.positions) == set(positions)


@dataclass
class NfeCounter:
    """Forward-call meter: a batch counts once, sequences are tallied honestly."""

    forward_calls: int = 0
    sequence_evaluations: int = 0

    def record(self, batch_size: int) -> None:
        self.forward_calls += 1
        self.sequence_evaluations += batch_size

    def snapshot(self) -> "NfeCounter":
        return NfeCounter(self.forward_calls, self.sequence_evaluations)

    def delta_since(self, earlier: "NfeCounter") -> "NfeCounter":
        return NfeCounter(
            self.forward_calls - earlier.forward_calls,
            self.sequence_evaluations - earlier.sequence_evaluations,
        )


class MarginalPredictor:
    """Base class implementing the metering, caching, and batch contract.

    Subclasses provide :meth:`_estimate`; determinism lets the base memoize
    per (tokens, step) so repeated queries are bitwise identical for free.
    """

    def __init__(self, vocab: Vocabulary):
        self.vocab = vocab
        self.nfe = NfeCounter()
        self._cache: dict[tuple[tuple[int, ...], int], MarginalEstimate] = {}

    def predict(self, state: SequenceState, step: int) -> MarginalEstimate:
        self.nfe.record(1)
        return self._cached(state, step)

    def predict_batch(
        self, states: Sequence[SequenceState], steps: Sequence[int]
    ) -> list[MarginalEstimate]:
        if len(states) == 0:
            raise ContractViolation("predict_batch requires a non-empty batch")
        if len(states) != len(steps):
            raise ContractViolation("states and steps must have equal length")
        self.nfe.record(len(states))
        estimates = []
        for index, (state, step) in enumerate(zip(states, steps)):
            try:
                estimates.append(self._cached(state, step))
            except MaskdiffError as exc:
                exc.args = (f"batch element {index}: {exc}",)
                raise
        return estimates

    def _cached(self, state: SequenceState, step: int) -> MarginalEstimate:
        if state.num_masked() == 0:
            raise ContractViolation("nothing to predict: state has no masked positions")
        key = (state.tokens, step)
        estimate = self._cache.get(key)
        if estimate is None:
            estimate = self._estimate(state, step)
            self._cache[key] = estimate
        return estimate

    def _estimate(self, state: SequenceState, step: int) -> MarginalEstimate:
        raise NotImplementedError


class TablePredictor(MarginalPredictor):
    """Synthetic predictor peaked at a target sequence with tunable context drift.

    Each masked position i gets ``(1 - sensitivity) * base_i + sensitivity *
    perturb_i`` where ``base_i`` is peaked at ``target[i]`` (peak mass 0.6 +
    0.4 * (i % 3) / 2, remainder spread uniformly) and ``perturb_i`` is a
    categorical derived from a stable hash of (seed, i, currently revealed
    pairs). sensitivity=0 is fully context-free; larger values make merged
    multi-step decisions genuinely fallible.
    """

    def __init__(
        self,
        target: Sequence[int],
        vocab: Vocabulary,
        sensitivity: float = 0.0,
        seed: int = 0,
    ):
        super().__init__(vocab)
        if len(target) == 0:
            raise ContractViolation("table predictor needs a non-empty target")
        for tok in target:
            if not vocab.is_real(tok):
                raise ContractViolation(f"target token {tok} outside the real vocabulary")
            if vocab.eos_id is not None and tok == vocab.eos_id:
                raise ContractViolation("target must not contain the eos token")
        if not 0.0 <= sensitivity <= 1.0:
            raise ContractViolation(f"sensitivity {sensitivity} outside [0, 1]")
        self.target = tuple(target)
        self.sensitivity = float(sensitivity)
        self.seed = seed & _MASK64
        self._base = self._build_base_rows()

    def _build_base_rows(self) -> np.ndarray:
        size = self.vocab.size
        rows = np.zeros((len(self.target), size))
        for i, tok in enumerate(self.target):
            peak = 0.6 + 0.4 * (i % 3) / 2
            if size == 1:
                rows[i, tok] = 1.0
            else:
                rows[i, :] = (1.0 - peak) / (size - 1)
                rows[i, tok] = peak
        rows.setflags(write=False)
        return rows

    def _estimate(self, state: SequenceState, step: int) -> MarginalEstimate:
        if state.length != len(self.target):
            raise ContractViolation(
                f"state length {state.length} does not match target length {len(self.target)}"
            )
        masked = state.masked_positions()
        base = self._base[list(masked)]
        if self.sensitivity == 0.0:
            return MarginalEstimate(positions=masked, rows=base.copy())
        context: list[int] = [self.seed]
        for pair in state.revealed_pairs():
            context.extend(pair)
        ctx_hash = fnv1a64(context)
        pos = np.asarray(masked, dtype=np.uint64)
        pos_hash = _mix64(np.uint64(ctx_hash) ^ ((pos + np.uint64(1)) * np.uint64(_GOLDEN)))
        token_keys = (np.arange(self.vocab.size, dtype=np.uint64) + np.uint64(1)) * np.uint64(
            0xC2B2AE3D27D4EB4F
        )
        cells = _mix64(pos_hash[:, None] ^ token_keys[None, :])
        weights = 0.1 + cells / 2.0**64
        perturb = weights / weights.sum(axis=1, keepdims=True)
        rows = (1.0 - self.sensitivity) * base + self.sensitivity * perturb
        return MarginalEstimate(positions=masked, rows=rows)


class NgramPredictor(MarginalPredictor):
    """Bigram-interpolation predictor over a token corpus.

    A masked position's row blends the bigram distribution conditioned on
    its nearest unmasked left neighbor, the reverse-bigram distribution
    conditioned on its nearest unmasked right neighbor, and the unigram,
    with add-one smoothing. A missing neighbor shifts its weight onto the
    unigram term.
    """

    LAMBDA_LEFT = 0.4
    LAMBDA_RIGHT = 0.4
    LAMBDA_UNIGRAM = 0.2

    def __init__(self, corpus: Sequence[Sequence[int]], vocab: Vocabulary):
        super().__init__(vocab)
        if not corpus or all(len(seq) == 0 for seq in corpus):
            raise ContractViolation("ngram predictor needs a non-empty corpus")
        size = vocab.size
        unigram = np.ones(size)
        left = np.ones((size, size))
        right = np.ones((size, size))
        for seq in corpus:
            for tok in seq:
                if not vocab.is_real(tok):
                    raise ContractViolation(f"corpus token {tok} outside the real vocabulary")
                unigram[tok] += 1.0
            for prev, nxt in zip(seq, seq[1:]):
                left[prev, nxt] += 1.0
                right[nxt, prev] += 1.0
        self._unigram = unigram / unigram.sum()
        self._left = left / left.sum(axis=1, keepdims=True)
        self._right = (right / right.sum(axis=0, keepdims=True)).T
        for arr in (self._unigram, self._left, self._right):
            arr.setflags(write=False)

    def _estimate(self, state: SequenceState, step: int) -> MarginalEstimate:
        masked = state.masked_positions()
        length = state.length
        nearest_left = [-1] * length
        last = -1
        for p, tok in enumerate(state.tokens):
            nearest_left[p] = last
            if tok != state.mask_id:
                last = tok
        nearest_right = [-1] * length
        last = -1
        for p in range(length - 1, -1, -1):
            nearest_right[p] = last
            if state.tokens[p] != state.mask_id:
                last = state.tokens[p]
        lt = np.asarray([nearest_left[p] for p in masked])
        rt = np.asarray([nearest_right[p] for p in masked])
        has_l = lt >= 0
        has_r = rt >= 0
        rows = self.LAMBDA_LEFT * has_l[:, None] * self._left[np.where(has_l, lt, 0)]
        rows += self.LAMBDA_RIGHT * has_r[:, None] * self._right[np.where(has_r, rt, 0)]
        uni_weight = (
            self.LAMBDA_UNIGRAM
            + self.LAMBDA_LEFT * (~has_l)
            + self.LAMBDA_RIGHT * (~has_r)
        )
        rows += uni_weight[:, None] * self._unigram[None, :]
        return MarginalEstimate(positions=masked, rows=rows)


class ReplayPredictor(MarginalPredictor):
    """Replays recorded top-k marginals keyed by (canonical state, step).

    Tail mass not covered by the recorded top-k entries is spread uniformly
    over the unlisted real tokens, so a full-width trace reproduces the
    original rows exactly.
    """

    def __init__(self, trace: TraceFile):
        vocab = Vocabulary(
            size=trace.header.vocab_size,
            mask_id=trace.header.mask_id,
            eos_id=trace.header.eos_id,
        )
        super().__init__(vocab)
        self.trace = trace

    def _estimate(self, state: SequenceState, step: int) -> MarginalEstimate:
        key = canonical_state_key(state.tokens, state.mask_id)
        record = self.trace.records.get((key, step))
        if record is None:
            raise TraceMissError(key, step)
        recorded = tuple(
            tok if tok >= 0 else state.mask_id for tok in record.tokens
        )
        if recorded != state.tokens:
            raise TraceFormatError(
                f"key collision: trace record {key} at step {step} stores a different state"
            )
        masked = state.masked_positions()
        if set(record.rows) != set(masked):
            raise TraceFormatError(
                f"trace record {key} rows do not cover the masked positions at step {step}"
            )
        size = self.vocab.size
        rows = np.zeros((len(masked), size))
        for k, position in enumerate(masked):
            listed = record.rows[position]
            listed_mass = 0.0
            for tok, prob in listed:
                rows[k, tok] = prob
                listed_mass += prob
            num_unlisted = size - len(listed)
            tail = max(0.0, 1.0 - listed_mass)
            if num_unlisted > 0:
                unlisted = np.ones(size, dtype=bool)
                for tok, _ in listed:
                    unlisted[tok] = False
                rows[k, unlisted] = tail / num_unlisted
        return MarginalEstimate(positions=masked, rows=rows)


class RecordingPredictor:
    """Wrapper that captures every estimate an inner predictor serves.

    Used to build replayable traces from synthetic runs; delegates metering
    to the wrapped predictor so NFE accounting is unchanged.
    """

    def __init__(self, inner: MarginalPredictor):
        self.inner = inner
        self.captured: dict[tuple[tuple[int, ...], int], MarginalEstimate] = {}

    @property
    def vocab(self) -> Vocabulary:
        return self.inner.vocab

    @property
    def nfe(self) -> NfeCounter:
        return self.inner.nfe

    def predict(self, state: SequenceState, step: int) -> MarginalEstimate:
        estimate = self.inner.predict(state, step)
        self.captured[(state.tokens, step)] = estimate
        return estimate

    def predict_batch(
        self, states: Sequence[SequenceState], steps: Sequence[int]
    ) -> list[MarginalEstimate]:
        estimates = self.inner.predict_batch(states, steps)
        for state, step, estimate in zip(states, steps, estimates):
            self.captured[(state.tokens, step)] = estimate
        return estimates


def make_table_predictor(
    target: Sequence[int],
    vocab: Vocabulary,
    sensitivity: float = 0.0,
    seed: int = 0,
) -> TablePredictor:
    return TablePredictor(target=target, vocab=vocab, sensitivity=sensitivity, seed=seed)


def make_ngram_predictor(corpus: Sequence[Sequence[int]], vocab: Vocabulary) -> NgramPredictor:
    return NgramPredictor(corpus=corpus, vocab=vocab)


def open_replay_predictor(path) -> ReplayPredictor:
    return ReplayPredictor(TraceFile.read(path))
