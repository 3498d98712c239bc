"""Vocabularies, schedules, sequence states, and deterministic randomness.

These are the value types everything else is built on: immutable token
sequences with an absorbing mask sentinel, time/quota schedules that say
how many positions each decoding step reveals, block layouts for
semi-autoregressive decoding, and a counter-based RNG whose draws are a
pure function of (seed, label, position) so results are identical across
processes, call orders, and batch shapes.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Iterator

from .errors import ConfigError, ContractViolation

__all__ = [
    "Vocabulary",
    "AlphaSchedule",
    "TimeSchedule",
    "BlockLayout",
    "SequenceState",
    "DecisionSet",
    "DeterministicRng",
    "alpha_linear",
    "make_uniform_schedule",
    "unmask_quota",
    "apply_decisions",
]


@dataclass(frozen=True)
class Vocabulary:
    """Token id space: real tokens ``0..size-1`` plus reserved sentinels.

    ``mask_id`` is the absorbing-state sentinel and always sits outside the
    real-token range. ``eos_id``, when present, is an ordinary generable
    token that downstream metrics treat as end-of-sequence.
    """

    size: int
    mask_id: int
    eos_id: int | None = None

    def __post_init__(self):
        if self.size < 1:
            raise ConfigError(f"vocabulary needs at least one real token, got size={self.size}")
        if self.mask_id < self.size:
            raise ConfigError(
                f"mask_id {self.mask_id} collides with the real-token range [0, {self.size})"
            )
        if self.eos_id is not None:
            if self.eos_id == self.mask_id:
                raise ConfigError("eos_id must be distinct from mask_id")
            if self.eos_id < 0 or self.eos_id >= self.total_ids:
                raise ConfigError(f"eos_id {self.eos_id} outside the id space")

    @classmethod
    def simple(cls, size: int, eos_id: int | None = None) -> "Vocabulary":
        """Vocabulary with ``mask_id`` packed directly after the real tokens."""
        return cls(size=size, mask_id=size, eos_id=eos_id)

    @property
    def total_ids(self) -> int:
        return max(self.size, self.mask_id + 1)

    def is_real(self, token: int) -> bool:
        return 0 <= token < self.size


@dataclass(frozen=True)
class AlphaSchedule:
    """Noise schedule t -> alpha_t: fraction of positions kept clean at time t.

    Monotonically non-increasing with alpha(0) = 1 and alpha(1) = 0. Only
    the linear family is implemented; every shipped decoder is driven by
    step quotas, so alpha matters only to the raw diffusion transitions.
    """

    kind: str = "linear"

    def __post_init__(self):
        if self.kind != "linear":
            raise ConfigError(f"unknown alpha schedule kind: {self.kind!r}")

    def __call__(self, t: float) -> float:
        if not 0.0 <= t <= 1.0:
            raise ContractViolation(f"time level {t} outside [0, 1]")
        return 1.0 - t


def alpha_linear(t: float) -> float:
    """Linear noise schedule: alpha_t = 1 - t."""
    return AlphaSchedule("linear")(t)


@dataclass(frozen=True)
class TimeSchedule:
    """Discrete time grid ``t_0..t_N`` with per-step unmask quotas.

    ``steps`` has N+1 strictly decreasing levels with t_0 = 1 and t_N = 0;
    ``quotas`` has N positive counts summing to the sequence length.
    """

    steps: tuple[float, ...]
    quotas: tuple[int, ...]

    def __post_init__(self):
        if len(self.steps) != len(self.quotas) + 1:
            raise ConfigError("steps must have exactly one more entry than quotas")
        if len(self.quotas) < 1:
            raise ConfigError("a schedule needs at least one step")
        if self.steps[0] != 1.0 or self.steps[-1] != 0.0:
            raise ConfigError("time levels must start at 1 and end at 0")
        for a, b in zip(self.steps, self.steps[1:]):
            if not a > b:
                raise ConfigError("time levels must be strictly decreasing")
        if any(q < 1 for q in self.quotas):
            raise ConfigError("every step must unmask at least one token")

    @property
    def num_steps(self) -> int:
        return len(self.quotas)

    @property
    def length(self) -> int:
        return sum(self.quotas)


def make_uniform_schedule(length: int, num_steps: int) -> TimeSchedule:
    """Evenly spaced schedule distributing ``length`` tokens over ``num_steps``.

    Quotas are split as evenly as possible with earlier steps receiving the
    remainder; ``num_steps == length`` yields one token per step.
    """
    if num_steps < 1:
        raise ConfigError("num_steps must be at least 1")
    if num_steps > length:
        raise ConfigError(
            f"num_steps {num_steps} exceeds length {length}; a step must unmask >= 1 token"
        )
    steps = tuple(1.0 - i / num_steps for i in range(num_steps + 1))
    base, remainder = divmod(length, num_steps)
    quotas = tuple(base + (1 if i < remainder else 0) for i in range(num_steps))
    return TimeSchedule(steps=steps, quotas=quotas)


def unmask_quota(schedule: TimeSchedule, i: int, j: int) -> int:
    """Tokens a scheduler must unmask when jumping step i -> step j."""
    if not 0 <= i < j <= schedule.num_steps:
        raise ContractViolation(f"invalid step jump {i} -> {j} on an N={schedule.num_steps} schedule")
    return sum(schedule.quotas[i:j])


@dataclass(frozen=True)
class BlockLayout:
    """Semi-autoregressive block structure: boundaries at multiples of ``block_size``."""

    block_size: int

    def __post_init__(self):
        if self.block_size < 1:
            raise ConfigError("block_size must be at least 1")

    def block_of(self, position: int) -> int:
        return position // self.block_size


@dataclass(frozen=True)
class SequenceState:
    """An immutable token sequence at a point on the decoding time grid.

    Positions holding ``mask_id`` are still absorbed; everything else is a
    committed token that will never change again (monotone unmasking).
    """

    tokens: tuple[int, ...]
    step_index: int
    mask_id: int

    @classmethod
    def all_masked(cls, length: int, mask_id: int) -> "SequenceState":
        return cls(tokens=(mask_id,) * length, step_index=0, mask_id=mask_id)

    @property
    def length(self) -> int:
        return len(self.tokens)

    def masked_positions(self) -> tuple[int, ...]:
        return tuple(p for p, tok in enumerate(self.tokens) if tok == self.mask_id)

    def num_masked(self) -> int:
        return sum(1 for tok in self.tokens if tok == self.mask_id)

    def is_complete(self) -> bool:
        return self.mask_id not in self.tokens

    def revealed_pairs(self) -> tuple[tuple[int, int], ...]:
        """(position, token) pairs for every unmasked position, ascending."""
        return tuple((p, tok) for p, tok in enumerate(self.tokens) if tok != self.mask_id)


@dataclass(frozen=True)
class DecisionSet:
    """A set of (position, token) unmask decisions for one scheduler jump.

    Entries are stored sorted by position, so dataclass equality is set
    equality. Positions are pairwise distinct and tokens are never the mask
    sentinel.
    """

    entries: tuple[tuple[int, int], ...]

    def __post_init__(self):
        positions = [p for p, _ in self.entries]
        if len(set(positions)) != len(positions):
            raise ContractViolation("decision set has duplicate positions")
        if list(self.entries) != sorted(self.entries):
            raise ContractViolation("decision entries must be sorted by position")

    @classmethod
    def of(cls, pairs: Iterable[tuple[int, int]]) -> "DecisionSet":
        return cls(entries=tuple(sorted(pairs)))

    def positions(self) -> tuple[int, ...]:
        return tuple(p for p, _ in self.entries)

    def pairs(self) -> frozenset[tuple[int, int]]:
        return frozenset(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return iter(self.entries)


def apply_decisions(
    state: SequenceState, decisions: DecisionSet, target_step: int
) -> SequenceState:
    """Write a decision set into a state, advancing it to ``target_step``.

    The input state is not mutated. Writing to an unmasked position or
    writing the mask sentinel signals a broken scheduler and raises.
    """
    if target_step <= state.step_index:
        raise ContractViolation(
            f"target step {target_step} does not advance past step {state.step_index}"
        )
    tokens = list(state.tokens)
    for position, token in decisions:
        if not 0 <= position < len(tokens):
            raise ContractViolation(f"decision position {position} out of range")
        if tokens[position] != state.mask_id:
            raise ContractViolation(f"decision targets already-unmasked position {position}")
        if token == state.mask_id:
            raise ContractViolation(f"decision writes the mask sentinel at position {position}")
        tokens[position] = token
    return SequenceState(tokens=tuple(tokens), step_index=target_step, mask_id=state.mask_id)


@dataclass(frozen=True)
class DeterministicRng:
    """Counter-based uniform source keyed by (seed, stream label, position).

    Each draw is a pure function of its key, so outputs are identical
    whether positions are queried singly, in any order, or as part of any
    batch: the batch-invariance contract the verification decoders rely on.
    """

    seed: int

    def __post_init__(self):
        object.__setattr__(self, "seed", self.seed & 0xFFFFFFFFFFFFFFFF)

    def uniform(self, label: str, position: int) -> float:
        """Deterministic uniform in [0, 1) for this (label, position) key."""
        h = hashlib.blake2b(digest_size=8)
        h.update(self.seed.to_bytes(8, "little"))
        h.update(label.encode("utf-8"))
        h.update(position.to_bytes(8, "little", signed=True))
        return int.from_bytes(h.digest(), "little") / 2.0**64
