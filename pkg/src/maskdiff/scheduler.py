"""Remasking schedulers: decide which masked positions to reveal, and to what.

Two families. The greedy scheduler fills an exact quota of positions ranked
by confidence; the threshold scheduler takes everything above a confidence
bar, or the single best position as a progress fallback. Both walk blocks
left to right, never touching block b+1 while block b still has masked
positions left outside the current decision set.

Token choice is either the argmax of the temperature-scaled row or an
inverse-CDF draw keyed by absolute position only. Position-only keying
makes a chosen token a pure function of the row that chose it, which is
what lets draft/target verification certify stochastic decodes too.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    BlockLayout,
    DecisionSet,
    DeterministicRng,
    SequenceState,
    TimeSchedule,
    unmask_quota,
)
from .errors import ConfigError, ContractViolation
from .predictor import MarginalEstimate, categorical_draw

__all__ = [
    "SchedulerConfig",
    "greedy_schedule",
    "threshold_schedule",
]

SCHEDULER_KINDS = ("greedy", "threshold")
SAMPLING_MODES = ("argmax", "stochastic")


@dataclass(frozen=True)
class SchedulerConfig:
    """How decisions are made: scheduler family, blocks, sampling, temperature."""

    kind: str
    layout: BlockLayout
    threshold: float | None = None
    sampling: str = "argmax"
    temperature: float = 1.0

    def __post_init__(self):
        if self.kind not in SCHEDULER_KINDS:
            raise ConfigError(f"unknown scheduler kind {self.kind!r}")
        if self.sampling not in SAMPLING_MODES:
            raise ConfigError(f"unknown sampling mode {self.sampling!r}")
        if self.kind == "threshold":
            if self.threshold is None:
                raise ConfigError("threshold scheduler requires a threshold")
            if not 0.0 < self.threshold <= 1.0:
                raise ConfigError(f"threshold {self.threshold} outside (0, 1]")
        elif self.threshold is not None:
            raise ConfigError("threshold only applies to the threshold scheduler")
        if self.temperature <= 0.0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")


def _scaled_row(row: np.ndarray, temperature: float) -> np.ndarray:
    if temperature == 1.0:
        return row
    scaled = np.power(row, 1.0 / temperature)
    total = scaled.sum()
    if not np.isfinite(total) or total <= 0.0:
        # Extreme temperatures collapse to the argmax one-hot.
        out = np.zeros_like(row)
        out[int(np.argmax(row))] = 1.0
        return out
    return scaled / total


def _resolve_tokens(
    estimate: MarginalEstimate,
    positions: tuple[int, ...],
    cfg: SchedulerConfig,
    rng: DeterministicRng,
) -> dict[int, tuple[int, float]]:
    """Chosen token and its confidence (scaled-row probability) per position."""
    choices: dict[int, tuple[int, float]] = {}
    for p in positions:
        row = _scaled_row(estimate.row(p), cfg.temperature)
        if cfg.sampling == "argmax":
            token = int(np.argmax(row))
        else:
            token = categorical_draw(row, rng.uniform("token", p))
        choices[p] = (token, float(row[token]))
    return choices


def _check_inputs(estimate: MarginalEstimate, state: SequenceState) -> tuple[int, ...]:
    masked = state.masked_positions()
    if not masked:
        raise ContractViolation("nothing to schedule: state has no masked positions")
    if not estimate.covers(masked):
        raise ContractViolation("estimate does not match the state's masked positions")
    return masked


def greedy_schedule(
    estimate: MarginalEstimate,
    state: SequenceState,
    i: int,
    j: int,
    schedule: TimeSchedule,
    cfg: SchedulerConfig,
    rng: DeterministicRng,
) -> DecisionSet:
    """Exactly quota(i, j) decisions from one estimate, blocks left to right.

    Within the earliest block holding masked positions, positions are ranked
    by confidence descending with ties to the lower index; if the quota
    exceeds that block's masked count, selection continues into the next
    block (pre-drafting across blocks), never reordering blocks.
    """
    masked = _check_inputs(estimate, state)
    quota = unmask_quota(schedule, i, j)
    if quota > len(masked):
        raise ContractViolation(
            f"quota {quota} for jump {i}->{j} exceeds {len(masked)} masked positions"
        )
    choices = _resolve_tokens(estimate, masked, cfg, rng)
    by_block: dict[int, list[int]] = {}
    for p in masked:
        by_block.setdefault(cfg.layout.block_of(p), []).append(p)
    selected: list[tuple[int, int]] = []
    remaining = quota
    for block in sorted(by_block):
        if remaining == 0:
            break
        ranked = sorted(by_block[block], key=lambda p: (-choices[p][1], p))
        for p in ranked[:remaining]:
            selected.append((p, choices[p][0]))
        remaining -= min(remaining, len(ranked))
    return DecisionSet.of(selected)


def threshold_schedule(
    estimate: MarginalEstimate,
    state: SequenceState,
    tau: float,
    cfg: SchedulerConfig,
    rng: DeterministicRng,
) -> DecisionSet:
    """All positions in the earliest masked block with confidence >= tau.

    When nothing clears the bar, the single highest-confidence position is
    unmasked instead so the decode always makes progress.
    """
    masked = _check_inputs(estimate, state)
    first_block = min(cfg.layout.block_of(p) for p in masked)
    candidates = tuple(p for p in masked if cfg.layout.block_of(p) == first_block)
    choices = _resolve_tokens(estimate, candidates, cfg, rng)
    selected = [p for p in candidates if choices[p][1] >= tau]
    if not selected:
        selected = [min(candidates, key=lambda p: (-choices[p][1], p))]
    return DecisionSet.of((p, choices[p][0]) for p in selected)
