"""The three decoders: static, threshold-parallel, and draft-and-verify.

Static decoding walks the time schedule one step per model call and its
realized path is the reference every other decoder is measured against.
Threshold decoding is the lossy parallel baseline. The draft-and-verify
decoder (``decode_freedave``) builds multiple look-ahead drafts from each
estimate, verifies them against one batched model call, and accepts the
longest prefix whose one-step extensions match — reproducing the static
sequence bit for bit in fewer forward calls.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .core import (
    DecisionSet,
    DeterministicRng,
    SequenceState,
    TimeSchedule,
    apply_decisions,
)
from .errors import ConfigError, MaskdiffError
from .predictor import MarginalPredictor, NfeCounter
from .scheduler import SchedulerConfig, greedy_schedule, threshold_schedule

__all__ = [
    "RoundRecord",
    "DecodeResult",
    "decode_static",
    "decode_threshold",
    "decode_freedave",
    "verifier_h",
    "replay_path",
]


@dataclass(frozen=True)
class RoundRecord:
    """One draft-and-verify round.

    ``drafts[k]`` extends the round's base state by k+1 scheduler steps from
    the shared estimate; ``targets[k]`` is ``drafts[k]`` advanced one step
    under its own fresh estimate. ``matched`` is the longest prefix with
    ``drafts[k+1] == targets[k]``; the round accepts ``drafts[matched]`` and
    lands on ``accepted_step``. ``batch_size`` counts the states sent to the
    batched forward (0 for the final single-step round, which needs none).
    """

    start_step: int
    draft_count: int
    drafts: tuple[SequenceState, ...]
    targets: tuple[SequenceState, ...]
    matched: int
    accepted_step: int
    batch_size: int


@dataclass(frozen=True)
class DecodeResult:
    """Final tokens plus full provenance: path, rounds, and NFE counters."""

    decoder: str
    tokens: tuple[int, ...]
    path: tuple[DecisionSet, ...]
    rounds: tuple[RoundRecord, ...]
    nfe: NfeCounter
    steps_taken: int


def replay_path(
    path: Sequence[DecisionSet], length: int, mask_id: int
) -> tuple[int, ...]:
    """Re-apply a decision path from the all-mask state; returns the tokens."""
    state = SequenceState.all_masked(length, mask_id)
    for k, decisions in enumerate(path):
        state = apply_decisions(state, decisions, k + 1)
    return state.tokens


def _check_schedule(schedule: TimeSchedule, length: int) -> None:
    if schedule.length != length:
        raise ConfigError(
            f"schedule unmasks {schedule.length} tokens but the sequence length is {length}"
        )


def _with_context(exc: MaskdiffError, context: str) -> MaskdiffError:
    exc.args = (f"{context}: {exc}",)
    return exc


def decode_static(
    predictor: MarginalPredictor,
    cfg: SchedulerConfig,
    schedule: TimeSchedule,
    length: int,
    rng: DeterministicRng,
) -> DecodeResult:
    """One-quota-per-step greedy decoding; its path is the oracle path."""
    if cfg.kind != "greedy":
        raise ConfigError("static decoding uses the greedy scheduler")
    _check_schedule(schedule, length)
    before = predictor.nfe.snapshot()
    state = SequenceState.all_masked(length, predictor.vocab.mask_id)
    path: list[DecisionSet] = []
    for i in range(schedule.num_steps):
        try:
            estimate = predictor.predict(state, i)
        except MaskdiffError as exc:
            raise _with_context(exc, f"static step {i}")
        decisions = greedy_schedule(estimate, state, i, i + 1, schedule, cfg, rng)
        state = apply_decisions(state, decisions, i + 1)
        path.append(decisions)
    return DecodeResult(
        decoder="static",
        tokens=state.tokens,
        path=tuple(path),
        rounds=(),
        nfe=predictor.nfe.delta_since(before),
        steps_taken=len(path),
    )


def decode_threshold(
    predictor: MarginalPredictor,
    cfg: SchedulerConfig,
    schedule: TimeSchedule,
    length: int,
    rng: DeterministicRng,
) -> DecodeResult:
    """Confidence-threshold parallel decoding: the lossy baseline."""
    if cfg.kind != "threshold":
        raise ConfigError("threshold decoding requires a threshold scheduler config")
    _check_schedule(schedule, length)
    before = predictor.nfe.snapshot()
    state = SequenceState.all_masked(length, predictor.vocab.mask_id)
    path: list[DecisionSet] = []
    round_index = 0
    while not state.is_complete():
        try:
            estimate = predictor.predict(state, round_index)
        except MaskdiffError as exc:
            raise _with_context(exc, f"threshold round {round_index}")
        decisions = threshold_schedule(estimate, state, cfg.threshold, cfg, rng)
        state = apply_decisions(state, decisions, round_index + 1)
        path.append(decisions)
        round_index += 1
    return DecodeResult(
        decoder="threshold",
        tokens=state.tokens,
        path=tuple(path),
        rounds=(),
        nfe=predictor.nfe.delta_since(before),
        steps_taken=len(path),
    )


def decode_freedave(
    predictor: MarginalPredictor,
    cfg: SchedulerConfig,
    schedule: TimeSchedule,
    length: int,
    draft_steps: int,
    rng: DeterministicRng,
) -> DecodeResult:
    """Draft-and-verify decoding: lossless parallel reproduction of static.

    Per round at step i, builds d_i = min(draft_steps, N - i) drafts from
    the current estimate (k-step jumps for k = 1..d_i), runs one batched
    forward over them, extends each draft one step under its own estimate,
    and accepts through the longest consecutive draft/target match. The
    accepted draft's batch row becomes the next round's estimate, so each
    round costs exactly one forward call beyond the initial one.
    """
    if draft_steps < 1:
        raise ConfigError("draft_steps must be at least 1")
    if cfg.kind != "greedy":
        raise ConfigError("draft-and-verify decoding uses the greedy scheduler")
    _check_schedule(schedule, length)
    num_steps = schedule.num_steps
    before = predictor.nfe.snapshot()
    state = SequenceState.all_masked(length, predictor.vocab.mask_id)
    try:
        estimate = predictor.predict(state, 0)
    except MaskdiffError as exc:
        raise _with_context(exc, "initial call")
    path: list[DecisionSet] = []
    rounds: list[RoundRecord] = []
    i = 0
    while i < num_steps:
        d_i = min(draft_steps, num_steps - i)
        drafts: list[SequenceState] = []
        draft_decisions: list[DecisionSet] = []
        for k in range(1, d_i + 1):
            decisions = greedy_schedule(estimate, state, i, i + k, schedule, cfg, rng)
            drafts.append(apply_decisions(state, decisions, i + k))
            draft_decisions.append(decisions)

        if i == num_steps - 1:
            # Last step: adopt the single-step draft without a verification
            # forward.
            state = drafts[0]
            path.append(draft_decisions[0])
            rounds.append(
                RoundRecord(
                    start_step=i,
                    draft_count=d_i,
                    drafts=tuple(drafts),
                    targets=(),
                    matched=0,
                    accepted_step=i + 1,
                    batch_size=0,
                )
            )
            i += 1
            break

        # The deepest draft is fully unmasked when it lands on step N; it
        # needs neither a target nor a next-round estimate, so keep it out
        # of the batch.
        batch = drafts if i + d_i < num_steps else drafts[:-1]
        try:
            batch_estimates = predictor.predict_batch(
                batch, [i + k for k in range(1, len(batch) + 1)]
            )
        except MaskdiffError as exc:
            raise _with_context(exc, f"verification round at step {i}")

        targets: list[SequenceState] = []
        for k in range(1, d_i):
            target_decisions = greedy_schedule(
                batch_estimates[k - 1], drafts[k - 1], i + k, i + k + 1, schedule, cfg, rng
            )
            targets.append(apply_decisions(drafts[k - 1], target_decisions, i + k + 1))

        matched = 0
        while matched < d_i - 1 and drafts[matched + 1].tokens == targets[matched].tokens:
            matched += 1

        rounds.append(
            RoundRecord(
                start_step=i,
                draft_count=d_i,
                drafts=tuple(drafts),
                targets=tuple(targets),
                matched=matched,
                accepted_step=i + matched + 1,
                batch_size=len(batch),
            )
        )
        path.append(draft_decisions[matched])
        state = drafts[matched]
        # matched == len(batch) only when the unbatched final draft was
        # accepted, which lands exactly on step N and ends the loop.
        estimate = batch_estimates[matched] if matched < len(batch) else None
        i += matched + 1

    return DecodeResult(
        decoder="freedave",
        tokens=state.tokens,
        path=tuple(path),
        rounds=tuple(rounds),
        nfe=predictor.nfe.delta_since(before),
        steps_taken=len(path),
    )


def verifier_h(round_record: RoundRecord, draft_steps: int) -> int:
    """Verified advance of a round: 1 when d = 1, else matched + 1.

    This is the executable form of the max-prefix verifier: the largest
    jump whose direct decision set decomposes into the chain of one-step
    decisions, realized by consecutive draft/target sequence matches.
    """
    if draft_steps == 1:
        return 1
    return round_record.matched + 1
