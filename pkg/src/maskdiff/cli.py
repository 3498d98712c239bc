"""Command-line client for the decoding service layer.

Subcommands mirror the HTTP endpoints one to one; all logic lives in
``maskdiff.service.handlers``. Exit codes: 0 success, 1 usage/config error,
2 decode or contract violation, 3 trace error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import (
    BenchReport,
    ComparisonConfig,
    RunConfig,
    write_report_csv,
    write_report_json,
)
from .errors import ConfigError, MaskdiffError, TraceError
from .service import handlers
from .service.models import (
    CompareRequest,
    DecodeRequest,
    PathlabRequest,
    ReplayValidateRequest,
    SweepRequest,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DECODE = 2
EXIT_TRACE = 3


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="maskdiff", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    decode = sub.add_parser("decode", help="run one decode from a run config")
    decode.add_argument("--config", required=True, help="run config JSON path")
    decode.add_argument("--decoder", choices=["static", "threshold", "freedave"])
    decode.add_argument("--d", type=int, help="draft steps (freedave)")
    decode.add_argument("--seed", type=int)
    decode.add_argument("--out", help="write the decode payload as JSON")

    compare = sub.add_parser("compare", help="run a static/parallel comparison group")
    compare.add_argument("--config", required=True, help="comparison or run config JSON path")
    compare.add_argument("--out", required=True, help="report path (.csv or .json)")

    pathlab = sub.add_parser("pathlab", help="brute-force feasible-path analysis")
    pathlab.add_argument("--config", required=True)
    pathlab.add_argument("--max-steps", type=int, default=14)
    pathlab.add_argument("--out", required=True)

    sweep = sub.add_parser("sweep", help="draft-step ablation sweep")
    sweep.add_argument("--config", required=True, help="freedave run config JSON path")
    sweep.add_argument("--d-list", default="1,2,4,8,16,32", help="comma-separated draft steps")
    sweep.add_argument("--out", required=True)

    replay = sub.add_parser("replay-validate", help="verify a trace file and its replay")
    replay.add_argument("--trace", required=True)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _load_run_config(path: str, args: argparse.Namespace) -> RunConfig:
    config = RunConfig.load(path)
    overrides = {}
    if getattr(args, "decoder", None):
        overrides["decoder"] = args.decoder
    if getattr(args, "d", None) is not None:
        overrides["decoder"] = overrides.get("decoder", "freedave")
        overrides["draft_steps"] = args.d
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if overrides:
        try:
            config = config.variant(**overrides)
        except ValueError as exc:
            raise ConfigError(f"invalid overrides: {exc}") from exc
    return config


def _write_report(report: BenchReport, out: str) -> None:
    if out.endswith(".csv"):
        write_report_csv(report, out)
    else:
        write_report_json(report, out)


def _cmd_decode(args) -> int:
    config = _load_run_config(args.config, args)
    response = handlers.handle_decode(DecodeRequest(config=config))
    if args.out:
        Path(args.out).write_text(response.model_dump_json(indent=2) + "\n")
    print(
        f"{response.decoder}: {response.valid_tokens} valid tokens in "
        f"{response.forward_calls} forward calls ({response.steps_taken} jumps, "
        f"{response.sequence_evaluations} sequence evaluations)"
    )
    print(f"tokens: {response.tokens}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    try:
        payload = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    if isinstance(payload, dict) and "configs" in payload:
        group = ComparisonConfig.load(args.config).configs
    else:
        config = RunConfig.load(args.config)
        group = [config.variant(decoder="static"), config]
    report = handlers.handle_compare(CompareRequest(configs=group))
    _write_report(report, args.out)
    for row in report.rows:
        print(
            f"{row.decoder:10s} calls={row.forward_calls:4d} "
            f"nfe_throughput={row.throughput_nfe:.3f} speedup={row.nfe_speedup:.2f}x "
            f"lossless={str(row.lossless).lower()}"
        )
    return EXIT_OK


def _cmd_pathlab(args) -> int:
    config = RunConfig.load(args.config)
    response = handlers.handle_pathlab(PathlabRequest(config=config, max_steps=args.max_steps))
    Path(args.out).write_text(response.model_dump_json(indent=2) + "\n")
    print(
        f"N={response.num_steps} edges={len(response.edges)} "
        f"optimal_length={response.optimal_length} max_span={response.max_span} "
        f"lemma_agree={str(response.lemma_agree).lower()}"
    )
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = RunConfig.load(args.config)
    try:
        d_values = [int(v) for v in args.d_list.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --d-list: {exc}") from exc
    report = handlers.handle_sweep(SweepRequest(config=config, d_values=d_values))
    _write_report(report, args.out)
    for row in report.rows:
        label = f"d={row.draft_steps}" if row.draft_steps else row.decoder
        print(
            f"{label:6s} calls={row.forward_calls:4d} memory_proxy={row.peak_memory_proxy:8d} "
            f"lossless={str(row.lossless).lower()}"
        )
    return EXIT_OK


def _cmd_replay_validate(args) -> int:
    response = handlers.handle_replay_validate(ReplayValidateRequest(path=args.trace))
    fidelity = "verified against recorded tokens" if response.matches_recorded else "no recorded tokens in header"
    print(
        f"trace ok: {response.records} records, L={response.length}, N={response.steps}, "
        f"topk={response.topk}; static replay {fidelity}"
    )
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


_COMMANDS = {
    "decode": _cmd_decode,
    "compare": _cmd_compare,
    "pathlab": _cmd_pathlab,
    "sweep": _cmd_sweep,
    "replay-validate": _cmd_replay_validate,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TraceError as exc:
        print(f"trace error: {exc}", file=sys.stderr)
        return EXIT_TRACE
    except MaskdiffError as exc:
        print(f"decode error: {exc}", file=sys.stderr)
        return EXIT_DECODE
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
