"""Static decoding against a live model, recorded as a replayable trace.

The recorder runs greedy one-quota-per-step decoding (argmax tokens,
confidence-ranked positions, blocks left to right) and writes every model
call's top-k marginals into the FDTRACE1 text format. It additionally
pre-populates every draft state a verification decoder with up to a given
look-ahead budget could batch: draft states are pure functions of the
per-node estimates and the greedy selection rule, so they are enumerable
without running a verifier.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .model import MaskedMarginalModel

MAGIC = "FDTRACE1"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


@dataclass
class RecorderConfig:
    """One recording run: model, prompt, schedule shape, and trace width."""

    model: str
    prompt: str = ""
    length: int = 16
    steps: int | None = None
    topk: int = 0  # 0 means full vocabulary width
    block_size: int | None = None
    draft_steps: int = 1
    out: str | Path = "run.fdtrace"
    device: str = "cpu"

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("length must be at least 1")
        if self.steps is None:
            self.steps = self.length
        if not 1 <= self.steps <= self.length:
            raise ValueError("steps must lie in [1, length]")
        if self.block_size is None:
            self.block_size = self.length
        if self.block_size < 1:
            raise ValueError("block_size must be at least 1")
        if self.topk < 0:
            raise ValueError("topk must be non-negative")
        if self.draft_steps < 1:
            raise ValueError("draft_steps must be at least 1")


@dataclass
class RecordedTrace:
    """In-memory trace plus the recorder's own decode for fidelity checks."""

    header: dict
    records: dict
    final_tokens: list[int]
    text: str
    model_calls: int

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        lines = [MAGIC, json.dumps(self.header, separators=(",", ":"))]
        for (_, step), record in sorted(self.records.items(), key=lambda kv: (kv[0][1], kv[0][0])):
            lines.append(json.dumps(record, separators=(",", ":")))
        path.write_text("\n".join(lines) + "\n")
        return path


def _state_key(tokens: Sequence[int], mask_id: int) -> str:
    h = _FNV_OFFSET
    for tok in tokens:
        value = -1 if tok == mask_id else tok
        for b in value.to_bytes(4, "little", signed=True):
            h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return format(h, "016x")


def _quotas(length: int, steps: int) -> list[int]:
    base, remainder = divmod(length, steps)
    return [base + (1 if i < remainder else 0) for i in range(steps)]


def _select(
    rows: np.ndarray,
    masked: list[int],
    quota: int,
    block_size: int,
) -> list[tuple[int, int]]:
    """Greedy selection: blocks left to right, confidence desc, position asc."""
    choices = {}
    for k, position in enumerate(masked):
        token = int(np.argmax(rows[k]))
        choices[position] = (token, float(rows[k][token]))
    by_block: dict[int, list[int]] = {}
    for position in masked:
        by_block.setdefault(position // block_size, []).append(position)
    selected: list[tuple[int, int]] = []
    remaining = quota
    for block in sorted(by_block):
        if remaining == 0:
            break
        ranked = sorted(by_block[block], key=lambda p: (-choices[p][1], p))
        for position in ranked[:remaining]:
            selected.append((position, choices[position][0]))
        remaining -= min(remaining, len(ranked))
    return selected


def record_static_trace(config: RecorderConfig, model: MaskedMarginalModel) -> RecordedTrace:
    """Run static decoding, recording every estimate plus draft-reachable ones."""
    length, steps = config.length, config.steps
    mask_id = model.mask_id
    topk = model.vocab_size if config.topk == 0 else min(config.topk, model.vocab_size)
    quotas = _quotas(length, steps)
    records: dict[tuple[str, int], dict] = {}
    calls = 0

    def record_call(tokens: list[int], step: int) -> np.ndarray:
        nonlocal calls
        masked = [p for p, tok in enumerate(tokens) if tok == mask_id]
        key = (_state_key(tokens, mask_id), step)
        if key in records:
            return records[key]["_rows_array"]
        rows = model.marginals(tokens, masked)
        calls += 1
        entries = []
        for k, position in enumerate(masked):
            order = np.lexsort((np.arange(model.vocab_size), -rows[k]))[:topk]
            entries.append([position, [[int(t), float(rows[k][t])] for t in order]])
        records[key] = {
            "key": key[0],
            "step": step,
            "state": [-1 if tok == mask_id else tok for tok in tokens],
            "rows": entries,
            "_rows_array": rows,
        }
        return rows

    # static decoding pass, keeping per-node states and estimates
    node_tokens: list[list[int]] = [[mask_id] * length]
    node_rows: list[np.ndarray] = []
    tokens = [mask_id] * length
    for i in range(steps):
        masked = [p for p, tok in enumerate(tokens) if tok == mask_id]
        rows = record_call(tokens, i)
        node_rows.append(rows)
        for position, token in _select(rows, masked, quotas[i], config.block_size):
            tokens[position] = token
        node_tokens.append(list(tokens))

    # pre-populate draft states: k-step jumps from each node's estimate
    for i in range(steps):
        base = node_tokens[i]
        masked = [p for p, tok in enumerate(base) if tok == mask_id]
        for k in range(2, min(config.draft_steps, steps - i) + 1):
            quota = sum(quotas[i : i + k])
            draft = list(base)
            for position, token in _select(node_rows[i], masked, quota, config.block_size):
                draft[position] = token
            if mask_id in draft:
                record_call(draft, i + k)

    text = model.decode_text(tokens)
    header = {
        "vocab_size": model.vocab_size,
        "mask_id": mask_id,
        "eos_id": model.eos_id,
        "length": length,
        "steps": steps,
        "topk": topk,
        "schedule": "uniform",
        "block_size": config.block_size,
        "sampling": "argmax",
        "temperature": 1.0,
        "seed": 0,
        "metadata": {
            "final_tokens": list(tokens),
            "text": text,
            "model": config.model,
            "prompt": config.prompt,
            "draft_steps": config.draft_steps,
        },
    }
    clean = {
        key: {k: v for k, v in record.items() if not k.startswith("_")}
        for key, record in records.items()
    }
    return RecordedTrace(
        header=header,
        records=clean,
        final_tokens=list(tokens),
        text=text,
        model_calls=calls,
    )
