"""Benchmark harness: run configs, decode execution, metrics, and reports.

A :class:`RunConfig` is the versioned wire format describing one decode
(predictor, schedule, scheduler, decoder, seed). Comparison groups run the
static reference first, then each decoder against it, producing report rows
whose derived columns (NFE throughput, speedup, lossless flag) recompute
exactly from the raw ones. Wall-clock numbers are reported but never
asserted anywhere; NFE throughput is the hardware-independent metric.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .core import (
    BlockLayout,
    DeterministicRng,
    TimeSchedule,
    Vocabulary,
    make_uniform_schedule,
)
from .engine import DecodeResult, decode_freedave, decode_static, decode_threshold
from .errors import ConfigError, TraceError
from .predictor import (
    MarginalPredictor,
    NgramPredictor,
    TablePredictor,
    ReplayPredictor,
)
from .scheduler import SchedulerConfig
from .trace import TraceFile

__all__ = [
    "TablePredictorSpec",
    "NgramPredictorSpec",
    "TracePredictorSpec",
    "RunConfig",
    "ComparisonConfig",
    "RoundSummary",
    "ReportRow",
    "BenchReport",
    "ReplayValidation",
    "PreparedRun",
    "valid_token_count",
    "prepare_run",
    "execute_run",
    "run_comparison",
    "sweep_draft_steps",
    "replay_validate",
    "write_report_csv",
    "read_report_csv",
    "write_report_json",
    "CSV_COLUMNS",
    "DEFAULT_SWEEP_D",
]

DEFAULT_SWEEP_D = (1, 2, 4, 8, 16, 32)


class TablePredictorSpec(BaseModel):
    """Synthetic context-sensitive predictor peaked at a fixed target."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["table"] = "table"
    vocab_size: int = Field(ge=1)
    target: list[int] = Field(min_length=1)
    sensitivity: float = Field(default=0.0, ge=0.0, le=1.0)
    eos_id: int | None = None


class NgramPredictorSpec(BaseModel):
    """Bigram-interpolation predictor built from an inline corpus."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["ngram"] = "ngram"
    vocab_size: int = Field(ge=1)
    corpus: list[list[int]] = Field(min_length=1)
    eos_id: int | None = None


class TracePredictorSpec(BaseModel):
    """Replay predictor backed by a recorded FDTRACE1 file."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["trace"] = "trace"
    path: str


PredictorSpec = Annotated[
    Union[TablePredictorSpec, NgramPredictorSpec, TracePredictorSpec],
    Field(discriminator="kind"),
]


class RunConfig(BaseModel):
    """One decode run, serializable as the versioned JSON config document."""

    model_config = ConfigDict(extra="forbid")

    format: Literal[1] = 1
    predictor: PredictorSpec
    length: int | None = Field(default=None, ge=1)
    steps: int | None = Field(default=None, ge=1)
    block_size: int | None = Field(default=None, ge=1)
    decoder: Literal["static", "threshold", "freedave"] = "static"
    draft_steps: int | None = Field(default=None, ge=1)
    threshold: float | None = Field(default=None, gt=0.0, le=1.0)
    sampling: Literal["argmax", "stochastic"] = "argmax"
    temperature: float = Field(default=1.0, gt=0.0)
    seed: int | None = None
    repetitions: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _check_decoder_params(self) -> "RunConfig":
        if (self.draft_steps is not None) != (self.decoder == "freedave"):
            raise ValueError("draft_steps must be present exactly when decoder is freedave")
        if (self.threshold is not None) != (self.decoder == "threshold"):
            raise ValueError("threshold must be present exactly when decoder is threshold")
        return self

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return _load_model(cls, path)

    def digest(self) -> str:
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()[:12]

    def variant(self, **overrides) -> "RunConfig":
        """Copy with decoder-level overrides, clearing stale decoder params."""
        data = self.model_dump()
        data.update(overrides)
        if data["decoder"] != "freedave" and "draft_steps" not in overrides:
            data["draft_steps"] = None
        if data["decoder"] != "threshold" and "threshold" not in overrides:
            data["threshold"] = None
        return RunConfig.model_validate(data)


class ComparisonConfig(BaseModel):
    """A group of run configs sharing predictor and schedule."""

    model_config = ConfigDict(extra="forbid")

    format: Literal[1] = 1
    configs: list[RunConfig] = Field(min_length=1)

    @classmethod
    def load(cls, path: str | Path) -> "ComparisonConfig":
        return _load_model(cls, path)


def _load_model(cls, path: str | Path):
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    try:
        return cls.model_validate(payload)
    except ValueError as exc:
        raise ConfigError(f"config {path} failed validation: {exc}") from exc


@dataclass
class PreparedRun:
    """A run config materialized into live engine objects."""

    config: RunConfig
    vocab: Vocabulary
    predictor: MarginalPredictor
    schedule: TimeSchedule
    scheduler_cfg: SchedulerConfig
    length: int
    seed: int
    rng: DeterministicRng


def _resolved(name: str, configured, implied, source: str):
    if configured is None:
        return implied
    if implied is not None and configured != implied:
        raise ConfigError(f"{name}={configured} conflicts with {source} value {implied}")
    return configured


def prepare_run(config: RunConfig, predictor: MarginalPredictor | None = None) -> PreparedRun:
    """Materialize a config; pass ``predictor`` to share one across a group."""
    spec = config.predictor
    if isinstance(spec, TablePredictorSpec):
        vocab = Vocabulary.simple(spec.vocab_size, eos_id=spec.eos_id)
        length = _resolved("length", config.length, len(spec.target), "the target")
        steps = config.steps or length
        block_size = config.block_size or length
        sampling, temperature = config.sampling, config.temperature
        seed = config.seed if config.seed is not None else 0
        if predictor is None:
            predictor = TablePredictor(
                target=spec.target, vocab=vocab, sensitivity=spec.sensitivity, seed=seed
            )
    elif isinstance(spec, NgramPredictorSpec):
        vocab = Vocabulary.simple(spec.vocab_size, eos_id=spec.eos_id)
        if config.length is None:
            raise ConfigError("ngram runs must set an explicit length")
        length = config.length
        steps = config.steps or length
        block_size = config.block_size or length
        sampling, temperature = config.sampling, config.temperature
        seed = config.seed if config.seed is not None else 0
        if predictor is None:
            predictor = NgramPredictor(corpus=spec.corpus, vocab=vocab)
    else:
        trace = TraceFile.read(spec.path)
        header = trace.header
        vocab = Vocabulary(size=header.vocab_size, mask_id=header.mask_id, eos_id=header.eos_id)
        length = _resolved("length", config.length, header.length, "the trace header")
        steps = _resolved("steps", config.steps, header.steps, "the trace header")
        block_size = _resolved(
            "block_size", config.block_size, header.block_size or header.length, "the trace header"
        )
        if header.schedule != "uniform":
            raise ConfigError(f"unsupported schedule kind {header.schedule!r} in trace")
        explicit = config.model_fields_set
        sampling = _resolved(
            "sampling",
            config.sampling if "sampling" in explicit else None,
            header.sampling,
            "the trace header",
        )
        temperature = _resolved(
            "temperature",
            config.temperature if "temperature" in explicit else None,
            header.temperature,
            "the trace header",
        )
        seed = _resolved("seed", config.seed, header.seed, "the trace header")
        if predictor is None:
            predictor = ReplayPredictor(trace)

    if steps > length:
        raise ConfigError(f"steps {steps} exceeds length {length}")
    schedule = make_uniform_schedule(length, steps)
    scheduler_cfg = SchedulerConfig(
        kind="threshold" if config.decoder == "threshold" else "greedy",
        layout=BlockLayout(block_size=block_size),
        threshold=config.threshold,
        sampling=sampling,
        temperature=temperature,
    )
    return PreparedRun(
        config=config,
        vocab=vocab,
        predictor=predictor,
        schedule=schedule,
        scheduler_cfg=scheduler_cfg,
        length=length,
        seed=seed,
        rng=DeterministicRng(seed),
    )


def execute_run(prepared: PreparedRun) -> tuple[DecodeResult, float]:
    """Run the configured decode, returning the result and mean wall-clock."""
    config = prepared.config
    result = None
    elapsed = []
    for _ in range(config.repetitions):
        start = time.perf_counter()
        if config.decoder == "static":
            result = decode_static(
                prepared.predictor, prepared.scheduler_cfg, prepared.schedule,
                prepared.length, prepared.rng,
            )
        elif config.decoder == "threshold":
            result = decode_threshold(
                prepared.predictor, prepared.scheduler_cfg, prepared.schedule,
                prepared.length, prepared.rng,
            )
        else:
            result = decode_freedave(
                prepared.predictor, prepared.scheduler_cfg, prepared.schedule,
                prepared.length, config.draft_steps, prepared.rng,
            )
        elapsed.append(time.perf_counter() - start)
    return result, sum(elapsed) / len(elapsed)


def valid_token_count(tokens, vocab: Vocabulary) -> int:
    """Tokens before the first eos, mask sentinels excluded."""
    count = 0
    for tok in tokens:
        if vocab.eos_id is not None and tok == vocab.eos_id:
            break
        if tok != vocab.mask_id:
            count += 1
    return count


class RoundSummary(BaseModel):
    start_step: int
    draft_count: int
    matched: int
    accepted_step: int
    batch_size: int


class ReportRow(BaseModel):
    """One decode in a comparison group, raw counters plus derived columns."""

    config_digest: str
    decoder: str
    draft_steps: int | None = None
    threshold: float | None = None
    length: int
    steps: int
    block_size: int
    seed: int
    valid_tokens: int
    forward_calls: int
    sequence_evaluations: int
    rounds: int
    steps_taken: int
    wall_clock_s: float
    throughput_nfe: float
    throughput_time: float
    nfe_speedup: float
    lossless: bool
    peak_memory_proxy: int
    tokens: list[int] | None = None
    round_records: list[RoundSummary] | None = None


class BenchReport(BaseModel):
    rows: list[ReportRow]


def _peak_memory_proxy(result: DecodeResult, length: int, vocab: Vocabulary) -> int:
    max_batch = max((r.batch_size for r in result.rounds), default=0)
    return max(max_batch, 1) * length * vocab.size


def _build_row(
    prepared: PreparedRun,
    result: DecodeResult,
    wall: float,
    reference: DecodeResult,
) -> ReportRow:
    config = prepared.config
    valid = valid_token_count(result.tokens, prepared.vocab)
    calls = result.nfe.forward_calls
    return ReportRow(
        config_digest=config.digest(),
        decoder=config.decoder,
        draft_steps=config.draft_steps,
        threshold=config.threshold,
        length=prepared.length,
        steps=prepared.schedule.num_steps,
        block_size=prepared.scheduler_cfg.layout.block_size,
        seed=prepared.seed,
        valid_tokens=valid,
        forward_calls=calls,
        sequence_evaluations=result.nfe.sequence_evaluations,
        rounds=len(result.rounds),
        steps_taken=result.steps_taken,
        wall_clock_s=wall,
        throughput_nfe=valid / calls,
        throughput_time=valid / wall if wall > 0 else 0.0,
        nfe_speedup=reference.nfe.forward_calls / calls,
        lossless=result.tokens == reference.tokens,
        peak_memory_proxy=_peak_memory_proxy(result, prepared.length, prepared.vocab),
        tokens=list(result.tokens),
        round_records=[
            RoundSummary(
                start_step=r.start_step,
                draft_count=r.draft_count,
                matched=r.matched,
                accepted_step=r.accepted_step,
                batch_size=r.batch_size,
            )
            for r in result.rounds
        ]
        or None,
    )


def _group_key(config: RunConfig) -> tuple:
    return (
        json.dumps(config.predictor.model_dump(mode="json"), sort_keys=True),
        config.length,
        config.steps,
        config.block_size,
        config.sampling,
        config.temperature,
        config.seed,
    )


def run_comparison(configs: list[RunConfig]) -> BenchReport:
    """Run a comparison group: static reference first, then each config.

    All configs must share the predictor and schedule parameters; rows carry
    lossless flags and NFE speedups relative to the static reference.
    """
    if not configs:
        raise ConfigError("comparison group is empty")
    keys = {_group_key(c) for c in configs}
    if len(keys) != 1:
        raise ConfigError("comparison configs must share predictor and schedule parameters")

    static_config = configs[0].variant(decoder="static")
    reference_prepared = prepare_run(static_config)
    shared_predictor = reference_prepared.predictor
    reference, ref_wall = execute_run(reference_prepared)

    rows = [_build_row(reference_prepared, reference, ref_wall, reference)]
    for config in configs:
        if config.decoder == "static":
            continue
        prepared = prepare_run(config, predictor=shared_predictor)
        result, wall = execute_run(prepared)
        rows.append(_build_row(prepared, result, wall, reference))
    return BenchReport(rows=rows)


def sweep_draft_steps(base: RunConfig, d_values=DEFAULT_SWEEP_D) -> BenchReport:
    """Draft-step ablation: one static reference plus one run per d."""
    if base.decoder != "freedave":
        raise ConfigError("sweep requires a freedave base config")
    if not d_values:
        raise ConfigError("sweep needs at least one d value")
    return run_comparison([base.variant(draft_steps=int(d)) for d in dict.fromkeys(d_values)])


def replay_validate(path: str | Path) -> "ReplayValidation":
    """Verify a trace file: format integrity plus static-replay fidelity."""
    trace = TraceFile.read(path)
    header = trace.header
    config = RunConfig(predictor=TracePredictorSpec(path=str(path)))
    prepared = prepare_run(config, predictor=ReplayPredictor(trace))
    result, _ = execute_run(prepared)
    recorded = header.metadata.get("final_tokens")
    if recorded is not None and list(result.tokens) != list(recorded):
        raise TraceError(
            "static replay diverged from the recorded tokens; "
            f"got {list(result.tokens)[:8]}... expected {list(recorded)[:8]}..."
        )
    return ReplayValidation(
        path=str(path),
        records=len(trace.records),
        length=header.length,
        steps=header.steps,
        topk=header.topk,
        replayed_tokens=list(result.tokens),
        matches_recorded=recorded is not None,
    )


class ReplayValidation(BaseModel):
    path: str
    records: int
    length: int
    steps: int
    topk: int
    replayed_tokens: list[int]
    matches_recorded: bool


CSV_COLUMNS = [
    "config_digest",
    "decoder",
    "draft_steps",
    "threshold",
    "length",
    "steps",
    "block_size",
    "seed",
    "valid_tokens",
    "forward_calls",
    "sequence_evaluations",
    "rounds",
    "steps_taken",
    "wall_clock_s",
    "throughput_nfe",
    "throughput_time",
    "nfe_speedup",
    "lossless",
    "peak_memory_proxy",
]


def write_report_csv(report: BenchReport, path: str | Path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=CSV_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        for row in report.rows:
            payload = row.model_dump()
            payload["lossless"] = "true" if row.lossless else "false"
            payload["draft_steps"] = "" if row.draft_steps is None else row.draft_steps
            payload["threshold"] = "" if row.threshold is None else row.threshold
            writer.writerow(payload)


def read_report_csv(path: str | Path) -> BenchReport:
    """Parse a CSV report, recomputing and asserting the derived columns."""
    rows = []
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames != CSV_COLUMNS:
            raise ConfigError(f"unexpected report header: {reader.fieldnames}")
        for raw in reader:
            row = ReportRow(
                config_digest=raw["config_digest"],
                decoder=raw["decoder"],
                draft_steps=int(raw["draft_steps"]) if raw["draft_steps"] else None,
                threshold=float(raw["threshold"]) if raw["threshold"] else None,
                length=int(raw["length"]),
                steps=int(raw["steps"]),
                block_size=int(raw["block_size"]),
                seed=int(raw["seed"]),
                valid_tokens=int(raw["valid_tokens"]),
                forward_calls=int(raw["forward_calls"]),
                sequence_evaluations=int(raw["sequence_evaluations"]),
                rounds=int(raw["rounds"]),
                steps_taken=int(raw["steps_taken"]),
                wall_clock_s=float(raw["wall_clock_s"]),
                throughput_nfe=float(raw["throughput_nfe"]),
                throughput_time=float(raw["throughput_time"]),
                nfe_speedup=float(raw["nfe_speedup"]),
                lossless=raw["lossless"] == "true",
                peak_memory_proxy=int(raw["peak_memory_proxy"]),
            )
            recomputed = row.valid_tokens / row.forward_calls
            if abs(recomputed - row.throughput_nfe) > 1e-9:
                raise ConfigError(
                    f"report row {row.config_digest}: throughput_nfe {row.throughput_nfe} "
                    f"does not recompute from valid_tokens/forward_calls = {recomputed}"
                )
            rows.append(row)
    return BenchReport(rows=rows)


def write_report_json(report: BenchReport, path: str | Path) -> None:
    Path(path).write_text(report.model_dump_json(indent=2) + "\n")
