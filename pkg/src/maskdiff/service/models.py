"""Request/response models for the decoding service."""

from __future__ import annotations

from pydantic import BaseModel, Field

from ..bench import BenchReport, ReplayValidation, RoundSummary, RunConfig

__all__ = [
    "DecodeRequest",
    "DecodeResponse",
    "CompareRequest",
    "SweepRequest",
    "PathlabRequest",
    "PathlabResponse",
    "ReplayValidateRequest",
    "BenchReport",
    "ReplayValidation",
]


class DecodeRequest(BaseModel):
    config: RunConfig


class DecodeResponse(BaseModel):
    decoder: str
    config_digest: str
    tokens: list[int]
    valid_tokens: int
    steps_taken: int
    forward_calls: int
    sequence_evaluations: int
    wall_clock_s: float
    path: list[list[list[int]]]
    rounds: list[RoundSummary]


class CompareRequest(BaseModel):
    configs: list[RunConfig] = Field(min_length=1)


class SweepRequest(BaseModel):
    config: RunConfig
    d_values: list[int] = Field(default=[1, 2, 4, 8, 16, 32], min_length=1)


class PathlabRequest(BaseModel):
    config: RunConfig
    max_steps: int = Field(default=14, ge=1)


class PathlabResponse(BaseModel):
    config_digest: str
    num_steps: int
    edges: list[list[int]]
    optimal_cut_points: list[int]
    optimal_length: int
    max_span: int
    greedy_at_span: list[int]
    greedy_at_length: list[int]
    lemma_agree: bool
    counterexample: dict | None = None
    verifier_cut_points: list[int] | None = None
    decode_round_count: int | None = None


class ReplayValidateRequest(BaseModel):
    path: str
