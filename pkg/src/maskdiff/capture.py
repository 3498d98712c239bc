"""Build replayable traces by running the decode loops against any predictor.

The capture records every estimate served during a static decode, then
pre-populates every draft state a verification decoder with up to
``draft_steps`` look-ahead could query. Draft reachability only needs the
greedy selection rule, not the verifier: accepted rounds always restart
from oracle states, so all batched states are k-step jumps from some oracle
node.
"""

from __future__ import annotations

import numpy as np

from .core import DeterministicRng, SequenceState, TimeSchedule, apply_decisions
from .engine import decode_static
from .errors import ConfigError
from .predictor import MarginalEstimate, MarginalPredictor, RecordingPredictor
from .scheduler import SchedulerConfig, greedy_schedule
from .trace import TraceFile, TraceHeader, TraceRecord, canonical_state_key

__all__ = ["record_static_trace"]


def _top_k_rows(
    estimate: MarginalEstimate, topk: int
) -> dict[int, tuple[tuple[int, float], ...]]:
    rows: dict[int, tuple[tuple[int, float], ...]] = {}
    size = estimate.rows.shape[1]
    width = min(topk, size)
    for position in estimate.positions:
        row = estimate.row(position)
        order = np.lexsort((np.arange(size), -row))[:width]
        rows[position] = tuple((int(tok), float(row[tok])) for tok in order)
    return rows


def record_static_trace(
    predictor: MarginalPredictor,
    cfg: SchedulerConfig,
    schedule: TimeSchedule,
    length: int,
    rng: DeterministicRng,
    draft_steps: int = 1,
    topk: int | None = None,
    metadata: dict | None = None,
) -> TraceFile:
    """Record a static decode plus all states reachable by up to
    ``draft_steps`` of drafting, wide enough that a verification decoder
    replayed with any budget <= ``draft_steps`` never misses."""
    if draft_steps < 1:
        raise ConfigError("draft_steps must be at least 1")
    vocab = predictor.vocab
    topk = vocab.size if topk is None else min(topk, vocab.size)
    recorder = RecordingPredictor(predictor)
    result = decode_static(recorder, cfg, schedule, length, rng)

    # Replay the oracle path to recover per-node states, then pre-populate
    # the k-step draft states from each node.
    num_steps = schedule.num_steps
    state = SequenceState.all_masked(length, vocab.mask_id)
    for i in range(num_steps):
        estimate = recorder.captured[(state.tokens, i)]
        for k in range(2, min(draft_steps, num_steps - i) + 1):
            decisions = greedy_schedule(estimate, state, i, i + k, schedule, cfg, rng)
            draft = apply_decisions(state, decisions, i + k)
            if draft.is_complete() or (draft.tokens, i + k) in recorder.captured:
                continue
            recorder.predict(draft, i + k)
        state = apply_decisions(state, result.path[i], i + 1)

    header = TraceHeader(
        vocab_size=vocab.size,
        mask_id=vocab.mask_id,
        eos_id=vocab.eos_id,
        length=length,
        steps=num_steps,
        topk=topk,
        schedule="uniform",
        block_size=cfg.layout.block_size,
        sampling=cfg.sampling,
        temperature=cfg.temperature,
        seed=rng.seed,
        metadata={
            "final_tokens": list(result.tokens),
            "draft_steps": draft_steps,
            **(metadata or {}),
        },
    )
    trace = TraceFile(header=header, records={})
    for (tokens, step), estimate in recorder.captured.items():
        record = TraceRecord(
            key=canonical_state_key(tokens, vocab.mask_id),
            step=step,
            tokens=tuple(-1 if tok == vocab.mask_id else tok for tok in tokens),
            rows=_top_k_rows(estimate, topk),
        )
        trace.add(record)
    return trace
