"""Service-layer operations shared by the HTTP endpoints and the CLI.

The CLI is a thin client over these handlers; the FastAPI app adds only
transport. Every handler takes and returns pydantic models so payloads are
identical on both surfaces.
"""

from __future__ import annotations

from ..bench import (
    BenchReport,
    ReplayValidation,
    RoundSummary,
    execute_run,
    prepare_run,
    replay_validate,
    run_comparison,
    sweep_draft_steps,
    valid_token_count,
)
from ..engine import decode_freedave
from ..errors import ConfigError
from ..pathlab import build_feasible_graph, greedy_verifier_path, lemma_from_graph
from .models import (
    CompareRequest,
    DecodeRequest,
    DecodeResponse,
    PathlabRequest,
    PathlabResponse,
    ReplayValidateRequest,
    SweepRequest,
)

__all__ = [
    "handle_decode",
    "handle_compare",
    "handle_sweep",
    "handle_pathlab",
    "handle_replay_validate",
]


def handle_decode(request: DecodeRequest) -> DecodeResponse:
    prepared = prepare_run(request.config)
    result, wall = execute_run(prepared)
    return DecodeResponse(
        decoder=result.decoder,
        config_digest=request.config.digest(),
        tokens=list(result.tokens),
        valid_tokens=valid_token_count(result.tokens, prepared.vocab),
        steps_taken=result.steps_taken,
        forward_calls=result.nfe.forward_calls,
        sequence_evaluations=result.nfe.sequence_evaluations,
        wall_clock_s=wall,
        path=[[[p, t] for p, t in decisions] for decisions in result.path],
        rounds=[
            RoundSummary(
                start_step=r.start_step,
                draft_count=r.draft_count,
                matched=r.matched,
                accepted_step=r.accepted_step,
                batch_size=r.batch_size,
            )
            for r in result.rounds
        ],
    )


def handle_compare(request: CompareRequest) -> BenchReport:
    return run_comparison(request.configs)


def handle_sweep(request: SweepRequest) -> BenchReport:
    return sweep_draft_steps(request.config, request.d_values)


def handle_pathlab(request: PathlabRequest) -> PathlabResponse:
    config = request.config
    if config.decoder == "threshold":
        raise ConfigError("path analysis applies to greedy-scheduler decoders")
    prepared = prepare_run(config.variant(decoder="static"))
    graph = build_feasible_graph(
        prepared.predictor,
        prepared.scheduler_cfg,
        prepared.schedule,
        prepared.length,
        prepared.rng,
        max_steps=request.max_steps,
    )
    lemma = lemma_from_graph(graph, prepared.length)

    verifier_cuts = None
    round_count = None
    if config.decoder == "freedave":
        verifier_cuts = list(greedy_verifier_path(graph, config.draft_steps).cut_points)
        fd_prepared = prepare_run(config, predictor=prepared.predictor)
        result = decode_freedave(
            fd_prepared.predictor,
            fd_prepared.scheduler_cfg,
            fd_prepared.schedule,
            fd_prepared.length,
            config.draft_steps,
            fd_prepared.rng,
        )
        round_count = len(result.rounds)

    return PathlabResponse(
        config_digest=config.digest(),
        num_steps=graph.num_steps,
        edges=sorted([i, j] for i, j in graph.edges),
        optimal_cut_points=list(lemma.optimal.cut_points),
        optimal_length=lemma.optimal.num_jumps,
        max_span=lemma.max_span,
        greedy_at_span=list(lemma.greedy_at_span.cut_points),
        greedy_at_length=list(lemma.greedy_at_length.cut_points),
        lemma_agree=lemma.agree,
        counterexample=lemma.counterexample,
        verifier_cut_points=verifier_cuts,
        decode_round_count=round_count,
    )


def handle_replay_validate(request: ReplayValidateRequest) -> ReplayValidation:
    return replay_validate(request.path)
