"""FDTRACE1 trace files: recorded (state, step) -> top-k marginals.

Line-oriented text format. Line 1 is the literal magic ``FDTRACE1``, line 2
a JSON header, and every following line one JSON record::

    {"key": <hex digest>, "step": <int>, "state": [<token or -1>...],
     "rows": [[position, [[token, probability], ...]], ...]}

The canonical state encoding is the token array serialized as little-endian
signed 32-bit integers with -1 standing for the mask sentinel, digested with
FNV-1a 64. The full ``state`` array is stored alongside the digest so key
collisions are detectable rather than silent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import TraceFormatError

__all__ = [
    "MAGIC",
    "TraceHeader",
    "TraceRecord",
    "TraceFile",
    "canonical_state_key",
    "fnv1a64_bytes",
]

MAGIC = "FDTRACE1"

_ROW_TOLERANCE = 1e-9
_MASK64 = 0xFFFFFFFFFFFFFFFF
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64_bytes(data: bytes) -> int:
    """FNV-1a 64-bit digest of a byte string."""
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


def canonical_state_key(tokens: Iterable[int], mask_id: int) -> str:
    """Hex digest of the canonical encoding of a token array."""
    buf = b"".join(
        (-1 if tok == mask_id else tok).to_bytes(4, "little", signed=True) for tok in tokens
    )
    return format(fnv1a64_bytes(buf), "016x")


@dataclass(frozen=True)
class TraceHeader:
    """Trace-wide parameters needed to rebuild the recorded decode exactly."""

    vocab_size: int
    mask_id: int
    eos_id: int | None
    length: int
    steps: int
    topk: int
    schedule: str = "uniform"
    block_size: int | None = None
    sampling: str = "argmax"
    temperature: float = 1.0
    seed: int = 0
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "vocab_size": self.vocab_size,
            "mask_id": self.mask_id,
            "eos_id": self.eos_id,
            "length": self.length,
            "steps": self.steps,
            "topk": self.topk,
            "schedule": self.schedule,
            "block_size": self.block_size,
            "sampling": self.sampling,
            "temperature": self.temperature,
            "seed": self.seed,
            "metadata": self.metadata,
        }
        return json.dumps(payload, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "TraceHeader":
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"header is not valid JSON: {exc}") from exc
        required = ("vocab_size", "mask_id", "eos_id", "length", "steps", "topk", "schedule")
        missing = [key for key in required if key not in payload]
        if missing:
            raise TraceFormatError(f"header missing fields: {', '.join(missing)}")
        return cls(
            vocab_size=int(payload["vocab_size"]),
            mask_id=int(payload["mask_id"]),
            eos_id=None if payload["eos_id"] is None else int(payload["eos_id"]),
            length=int(payload["length"]),
            steps=int(payload["steps"]),
            topk=int(payload["topk"]),
            schedule=str(payload["schedule"]),
            block_size=None if payload.get("block_size") is None else int(payload["block_size"]),
            sampling=str(payload.get("sampling", "argmax")),
            temperature=float(payload.get("temperature", 1.0)),
            seed=int(payload.get("seed", 0)),
            metadata=dict(payload.get("metadata", {})),
        )


@dataclass(frozen=True)
class TraceRecord:
    """One recorded model call: canonical key, step, full state, top-k rows."""

    key: str
    step: int
    tokens: tuple[int, ...]
    rows: Mapping[int, tuple[tuple[int, float], ...]]

    def to_json(self) -> str:
        payload = {
            "key": self.key,
            "step": self.step,
            "state": list(self.tokens),
            "rows": [
                [position, [[tok, prob] for tok, prob in row]]
                for position, row in sorted(self.rows.items())
            ],
        }
        return json.dumps(payload, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str, line_number: int) -> "TraceRecord":
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"line {line_number}: invalid JSON: {exc}") from exc
        try:
            rows = {
                int(position): tuple((int(tok), float(prob)) for tok, prob in row)
                for position, row in payload["rows"]
            }
            return cls(
                key=str(payload["key"]),
                step=int(payload["step"]),
                tokens=tuple(int(tok) for tok in payload["state"]),
                rows=rows,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise TraceFormatError(f"line {line_number}: malformed record: {exc}") from exc


@dataclass
class TraceFile:
    """A parsed, validated trace: header plus records keyed by (digest, step)."""

    header: TraceHeader
    records: dict[tuple[str, int], TraceRecord]

    @classmethod
    def read(cls, path: str | Path) -> "TraceFile":
        path = Path(path)
        try:
            lines = path.read_text().splitlines()
        except OSError as exc:
            raise TraceFormatError(f"cannot read trace {path}: {exc}") from exc
        if not lines or lines[0].strip() != MAGIC:
            raise TraceFormatError(f"bad magic: expected {MAGIC!r} on line 1")
        if len(lines) < 2:
            raise TraceFormatError("trace has no header line")
        header = TraceHeader.from_json(lines[1])
        records: dict[tuple[str, int], TraceRecord] = {}
        for line_number, line in enumerate(lines[2:], start=3):
            if not line.strip():
                continue
            record = TraceRecord.from_json(line, line_number)
            _validate_record(record, header, line_number)
            key = (record.key, record.step)
            if key in records:
                raise TraceFormatError(f"line {line_number}: duplicate record key {key}")
            records[key] = record
        return cls(header=header, records=records)

    def write(self, path: str | Path) -> None:
        path = Path(path)
        out = [MAGIC, self.header.to_json()]
        for _, record in sorted(self.records.items(), key=lambda kv: (kv[0][1], kv[0][0])):
            out.append(record.to_json())
        path.write_text("\n".join(out) + "\n")

    def add(self, record: TraceRecord) -> None:
        key = (record.key, record.step)
        existing = self.records.get(key)
        if existing is not None:
            if existing != record:
                raise TraceFormatError(f"conflicting records for key {key}")
            return
        self.records[key] = record


def _validate_record(record: TraceRecord, header: TraceHeader, line_number: int) -> None:
    if len(record.tokens) != header.length:
        raise TraceFormatError(
            f"line {line_number}: state length {len(record.tokens)} != header length {header.length}"
        )
    expected_key = canonical_state_key(
        tuple(header.mask_id if tok == -1 else tok for tok in record.tokens), header.mask_id
    )
    if record.key != expected_key:
        raise TraceFormatError(
            f"line {line_number}: key {record.key} does not match state digest {expected_key}"
        )
    if not 0 <= record.step <= header.steps:
        raise TraceFormatError(f"line {line_number}: step {record.step} outside the schedule")
    masked = {p for p, tok in enumerate(record.tokens) if tok == -1}
    if set(record.rows) != masked:
        raise TraceFormatError(
            f"line {line_number}: rows cover positions {sorted(record.rows)} "
            f"but the masked set is {sorted(masked)}"
        )
    for position, row in record.rows.items():
        if len(row) == 0 or len(row) > header.vocab_size:
            raise TraceFormatError(
                f"line {line_number}: row at position {position} has invalid width {len(row)}"
            )
        seen = set()
        mass = 0.0
        for tok, prob in row:
            if not 0 <= tok < header.vocab_size:
                raise TraceFormatError(
                    f"line {line_number}: row token {tok} outside the vocabulary"
                )
            if tok in seen:
                raise TraceFormatError(f"line {line_number}: duplicate row token {tok}")
            seen.add(tok)
            if not 0.0 <= prob <= 1.0 + _ROW_TOLERANCE:
                raise TraceFormatError(f"line {line_number}: probability {prob} outside [0, 1]")
            mass += prob
        if mass > 1.0 + 1e-6:
            raise TraceFormatError(
                f"line {line_number}: row mass {mass} at position {position} exceeds 1"
            )
        if len(row) == header.vocab_size and abs(mass - 1.0) > 1e-6:
            raise TraceFormatError(
                f"line {line_number}: full-width row at position {position} sums to {mass}"
            )
