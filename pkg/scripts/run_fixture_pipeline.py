#!/usr/bin/env python3
"""Run the whole pipeline on the synthetic fixture and print a summary.

Stages: prep-audio -> train-spectro -> train-vae -> evaluate, then a few
sample lines per artist from the first seed's checkpoint.
"""

import argparse
import json
import sys
import time
from pathlib import Path

from lyra.checkpoint import load_vae_checkpoint
from lyra.config import load_config
from lyra.pipeline import (
    evaluate_runs,
    prep_audio,
    train_spectro,
    train_vae_runs,
    vae_checkpoint_path,
)
from lyra.vae import generate


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("config", help="config JSON (see make_fixture_data.py)")
    parser.add_argument("--mode", default=None, help="override the conditioning mode")
    args = parser.parse_args(argv)

    cfg = load_config(args.config)
    mode = args.mode or cfg.mode

    t0 = time.time()
    cache = prep_audio(cfg)
    print(f"[{time.time()-t0:6.1f}s] spectrograms cached at {cache}")

    report = train_spectro(cfg)
    print(f"[{time.time()-t0:6.1f}s] spectro classifier test accuracy "
          f"{report['test_accuracy']:.3f}")

    paths = train_vae_runs(cfg, mode)
    print(f"[{time.time()-t0:6.1f}s] trained {len(paths)} VAE checkpoint(s), mode {mode}")

    eval_report = evaluate_runs(cfg, mode)
    print(f"[{time.time()-t0:6.1f}s] evaluation:")
    print(json.dumps(
        {k: v for k, v in eval_report.to_dict().items()
         if k in ("style_accuracy", "diag_argmin", "uniqueness", "verbatim_copy_rate")},
        indent=2,
    ))

    model = load_vae_checkpoint(vae_checkpoint_path(cfg, mode, cfg.seeds[0]))
    for artist in model.artists:
        lines = generate(model, artist.index, n=3, temperature=1.0, seed=7)
        print(f"\n{artist.name} ({artist.genre}):")
        for line in lines:
            print(f"  {line}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
