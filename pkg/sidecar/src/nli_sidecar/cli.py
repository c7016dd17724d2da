"""Command line: serve a scoring backend, or fine-tune one."""
from __future__ import annotations

import argparse
import json
import sys

from .data import SidecarError
from .train import TrainConfig, train


def cmd_serve(args: argparse.Namespace) -> int:
    from .server import create_app, serve

    if args.stub:
        from .scorers import StubScorer

        loader = StubScorer
    else:
        if not args.model:
            print("nli-sidecar: serve needs --model PATH or --stub", file=sys.stderr)
            return 2
        from .scorers import ModelScorer

        model_path = args.model

        def loader():
            return ModelScorer(model_path)

    serve(create_app(loader), host=args.host, port=args.port)
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = TrainConfig(
        base_model_id=args.base_model,
        out_dir=args.out,
        human_pairs_path=args.human_pairs,
        silver_pairs_path=args.silver_pairs,
        max_human_pairs=args.max_human_pairs,
        validation_fraction=args.validation_fraction,
        patience=args.patience,
        seed=args.seed,
        max_epochs=args.max_epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
    )
    record = train(cfg)
    json.dump(record, sys.stdout, indent=2)
    print()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nli-sidecar")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("serve", help="serve /score and /score_batch")
    p.add_argument("--model", default=None, help="fine-tuned checkpoint directory")
    p.add_argument("--stub", action="store_true",
                   help="serve the containment heuristic instead of a model")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8400)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("train", help="fine-tune a cross-encoder on labeled pairs")
    p.add_argument("--base-model", required=True,
                   help="checkpoint id or local directory to start from")
    p.add_argument("--out", required=True, help="output directory for the artifact")
    p.add_argument("--human-pairs", default=None)
    p.add_argument("--silver-pairs", default=None)
    p.add_argument("--max-human-pairs", type=int, default=None)
    p.add_argument("--validation-fraction", type=float, default=0.2)
    p.add_argument("--patience", type=int, default=3)
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--max-epochs", type=int, default=40)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--learning-rate", type=float, default=5e-4)
    p.set_defaults(func=cmd_train)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SidecarError as exc:
        print(f"nli-sidecar: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"nli-sidecar: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
