#!/usr/bin/env python3
"""Write the two-artist synthetic fixture (corpus + tone audio) and a
desk-scale config, ready for the CLI pipeline."""

import argparse
import sys
from pathlib import Path

from lyra.config import RunConfig, save_config
from lyra.fixtures import synthetic_token_corpus, write_audio_dir, write_corpus_dir


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("target", help="directory to create the fixture in")
    parser.add_argument("--lines-per-artist", type=int, default=200)
    parser.add_argument("--songs-per-artist", type=int, default=6)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    target = Path(args.target)
    data = target / "data"
    artists, lines = synthetic_token_corpus(
        n_per_artist=args.lines_per_artist, seed=args.seed
    )
    write_corpus_dir(data, artists, lines)
    write_audio_dir(data, artists, n_songs=args.songs_per_artist, seconds=31.0,
                    sr=8000, seed=args.seed)

    cfg = RunConfig(
        corpus_dir=str(data), out_dir=str(target / "runs"), mode="audioNT",
        seeds=[11, 12, 13, 14, 15],
    )
    cfg.audio.n_fft = 512
    cfg.audio.hop = 512
    cfg.audio.n_mels = 32
    cfg.spectro.conv_channels = [4, 8]
    cfg.spectro.head_sizes = [32, 16, 16]
    cfg.spectro.epochs = 6
    cfg.vae.word_emb_dim = 48
    cfg.vae.encoder_hidden = 48
    cfg.vae.latent_dim = 16
    cfg.vae.decoder_hidden = 96
    cfg.vae.artist_emb_dim = 16
    cfg.vae.min_count = 1
    cfg.vae.max_line_len = 12
    cfg.vae.steps = 2600
    cfg.vae.batch_size = 16
    cfg.vae.lr = 2e-3
    cfg.evaluation.n_generate = 100
    cfg.evaluation.classifier_epochs = 10
    cfg.evaluation.classifier_lr = 5e-3
    cfg.evaluation.classifier_feature_maps = 16
    cfg.evaluation.classifier_emb_dim = 24
    config_path = target / "config.json"
    save_config(cfg, config_path)

    print(f"fixture corpus + audio under {data}")
    print(f"config written to {config_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
