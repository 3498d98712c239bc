"""Command-line entry point: record one trace from a masked language model."""

from __future__ import annotations

import argparse
import sys

from .model import UnsupportedModelError, load_model
from .recorder import RecorderConfig, record_static_trace


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tracerec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    record = sub.add_parser("record", help="record a static decode as an FDTRACE1 file")
    record.add_argument("--model", required=True, help="HF model id/path or builtin:char")
    record.add_argument("--prompt", default="", help="conditioning prompt text")
    record.add_argument("--length", type=int, required=True, help="generation length L")
    record.add_argument("--steps", type=int, default=None, help="decoding steps N (default L)")
    record.add_argument("--topk", type=int, default=0, help="row width (0 = full vocabulary)")
    record.add_argument("--block", type=int, default=None, help="block size (default L)")
    record.add_argument("--d", type=int, default=1, help="draft budget to pre-populate")
    record.add_argument("--out", required=True, help="trace output path")
    record.add_argument("--device", default="cpu")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = RecorderConfig(
            model=args.model,
            prompt=args.prompt,
            length=args.length,
            steps=args.steps,
            topk=args.topk,
            block_size=args.block,
            draft_steps=args.d,
            out=args.out,
            device=args.device,
        )
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        model = load_model(config.model, prompt=config.prompt, device=config.device)
    except (UnsupportedModelError, ValueError) as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return 1
    trace = record_static_trace(config, model)
    path = trace.write(config.out)
    print(
        f"recorded {len(trace.records)} states in {trace.model_calls} model calls -> {path}"
    )
    print(f"decoded text: {trace.text!r}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
