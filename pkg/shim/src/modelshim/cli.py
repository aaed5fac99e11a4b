"""`modelshim serve` entry point."""

from __future__ import annotations

import argparse
import json
import sys

import uvicorn

from .app import ShimConfig, create_app


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modelshim")
    sub = parser.add_subparsers(dest="command", required=True)
    serve = sub.add_parser("serve")
    serve.add_argument("--config", help="JSON config file (flags override it)")
    serve.add_argument("--embed-model", default=None, help="e.g. hash:256")
    serve.add_argument("--chat-model", default=None, help="echo or script:<path>")
    serve.add_argument("--device", default=None)
    serve.add_argument("--port", type=int, default=None)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--max-batch-size", type=int, default=None)
    return parser


def load_shim_config(args) -> ShimConfig:
    values = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            values.update(json.load(fh))
    for field, flag in (
        ("embed_model", args.embed_model),
        ("chat_model", args.chat_model),
        ("device", args.device),
        ("port", args.port),
        ("max_batch_size", args.max_batch_size),
    ):
        if flag is not None:
            values[field] = flag
    return ShimConfig(**values)


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    config = load_shim_config(args)
    try:
        app = create_app(config)  # model load failures abort startup
    except (ValueError, OSError) as exc:
        print(f"model load failed: {exc}", file=sys.stderr)
        return 1
    uvicorn.run(app, host=args.host, port=config.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
