"""FastAPI application exposing the decoding engine over HTTP.

Run with ``maskdiff serve`` or ``uvicorn maskdiff.service.app:app``.
Error mapping: bad configs are 400, broken decode contracts 422, and trace
problems 409, each with a JSON body naming the error class.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import ConfigError, ContractViolation, MaskdiffError, PredictorError, TraceError
from . import handlers
from .models import (
    BenchReport,
    CompareRequest,
    DecodeRequest,
    DecodeResponse,
    PathlabRequest,
    PathlabResponse,
    ReplayValidateRequest,
    ReplayValidation,
    SweepRequest,
)

app = FastAPI(title="maskdiff decoding service", version=__version__)


def _status_for(exc: MaskdiffError) -> int:
    if isinstance(exc, ConfigError):
        return 400
    if isinstance(exc, TraceError):
        return 409
    if isinstance(exc, (ContractViolation, PredictorError)):
        return 422
    return 500


@app.exception_handler(MaskdiffError)
async def engine_error_handler(_: Request, exc: MaskdiffError) -> JSONResponse:
    return JSONResponse(
        status_code=_status_for(exc),
        content={"error": type(exc).__name__, "detail": str(exc)},
    )


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/decode", response_model=DecodeResponse)
def decode(request: DecodeRequest) -> DecodeResponse:
    return handlers.handle_decode(request)


@app.post("/compare", response_model=BenchReport)
def compare(request: CompareRequest) -> BenchReport:
    return handlers.handle_compare(request)


@app.post("/sweep", response_model=BenchReport)
def sweep(request: SweepRequest) -> BenchReport:
    return handlers.handle_sweep(request)


@app.post("/pathlab", response_model=PathlabResponse)
def pathlab(request: PathlabRequest) -> PathlabResponse:
    return handlers.handle_pathlab(request)


@app.post("/replay-validate", response_model=ReplayValidation)
def replay_validate(request: ReplayValidateRequest) -> ReplayValidation:
    return handlers.handle_replay_validate(request)
