"""Command-line entry point: prep-audio, train-spectro, train-vae,
generate, evaluate, serve."""

from __future__ import annotations

import argparse
import json
import sys

from .config import load_config
from .vae import CONDITIONING_MODES


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lyra",
        description="Artist-conditioned lyric generation pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prep-audio", help="decode wavs, cut clips, cache spectrograms")
    p.add_argument("config")

    p = sub.add_parser("train-spectro", help="train the spectrogram artist classifier")
    p.add_argument("config")

    p = sub.add_parser("train-vae", help="train one VAE checkpoint per seed")
    p.add_argument("config")
    p.add_argument("--mode", choices=CONDITIONING_MODES)

    p = sub.add_parser("generate", help="sample lines from a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--artist", required=True, help="artist display name")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("evaluate", help="evaluate checkpoints, aggregate over seeds")
    p.add_argument("config")

    p = sub.add_parser("serve", help="start the HTTP generation service")
    p.add_argument("checkpoint_dir")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")

    return parser


def cmd_generate(args) -> int:
    from .checkpoint import load_vae_checkpoint
    from .vae import generate

    model = load_vae_checkpoint(args.checkpoint)
    matches = [a for a in model.artists if a.name == args.artist]
    if not matches:
        known = ", ".join(a.name for a in model.artists)
        raise ValueError(f"unknown artist {args.artist!r}; checkpoint has: {known}")
    lines = generate(
        model,
        matches[0].index,
        n=args.n,
        temperature=args.temperature,
        seed=args.seed,
    )
    for line in lines:
        print(line)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "prep-audio":
            from .pipeline import prep_audio

            cache = prep_audio(load_config(args.config))
            print(f"spectrogram cache written to {cache}")
        elif args.command == "train-spectro":
            from .pipeline import train_spectro

            report = train_spectro(load_config(args.config))
            print(json.dumps(report, indent=2))
        elif args.command == "train-vae":
            from .pipeline import train_vae_runs

            paths = train_vae_runs(load_config(args.config), args.mode)
            for p in paths:
                print(p)
        elif args.command == "generate":
            return cmd_generate(args)
        elif args.command == "evaluate":
            from .pipeline import evaluate_runs

            report = evaluate_runs(load_config(args.config))
            print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
        elif args.command == "serve":
            import os

            import uvicorn

            from .service import create_app

            app = create_app(args.checkpoint_dir, ui_dir=os.environ.get("LYRA_UI_DIR"))
            uvicorn.run(app, host=args.host, port=args.port)
        return 0
    except (ValueError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
