"""Serve the bridge.

    cbfgen-bridge serve --tiny --port 8321
    cbfgen-bridge serve --generator meta-llama/Meta-Llama-3-8B \
        --classifier cardiffnlp/twitter-roberta-base-sentiment-latest \
        --device cuda --port 8321

``--tiny`` serves small seeded random models (no downloads), which is enough
to exercise every endpoint and the full generation loop end to end. Real
model names need the weights available locally or a working hub connection,
and an 8B generator wants GPU-class hardware.
"""

from __future__ import annotations

import argparse
import os

DEFAULT_GENERATOR = "meta-llama/Meta-Llama-3-8B"
DEFAULT_CLASSIFIER = "cardiffnlp/twitter-roberta-base-sentiment-latest"
PORT_ENV_VAR = "CBFGEN_BRIDGE_PORT"


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .models import build_tiny, load_pretrained
    from .server import create_app

    if args.tiny:
        bundle = build_tiny(seed=args.tiny_seed)
    else:
        bundle = load_pretrained(args.generator, args.classifier, device=args.device)
    app = create_app(bundle)
    port = args.port or int(os.environ.get(PORT_ENV_VAR, "8321"))
    uvicorn.run(app, host=args.host, port=port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cbfgen-bridge")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="start the inference bridge")
    serve.add_argument("--generator", default=DEFAULT_GENERATOR,
                       help="causal LM name or path")
    serve.add_argument("--classifier", default=DEFAULT_CLASSIFIER,
                       help="3-class sentiment model name or path")
    serve.add_argument("--device", default="cpu", help="cpu or cuda[:n]")
    serve.add_argument("--tiny", action="store_true",
                       help="serve small seeded random models (offline)")
    serve.add_argument("--tiny-seed", type=int, default=0)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=0,
                       help=f"port (default: ${PORT_ENV_VAR} or 8321)")
    serve.set_defaults(func=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    import sys

    sys.exit(main())
