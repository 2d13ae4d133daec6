"""End-to-end stages glued together for the CLI and the service.

Each stage reads a RunConfig, writes its artifacts under the configured
output directory, and records a manifest with the config hash and seeds so
the run can be reproduced bit-identically.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import ngram
from .audio import decode_wav, grouped_split, mel_spectrogram, segment_clips
from .checkpoint import (
    load_spectrogram_cache,
    load_vae_checkpoint,
    save_spectro_checkpoint,
    save_spectrogram_cache,
    save_vae_checkpoint,
)
from .config import RunConfig, write_manifest
from .corpus import PreparedCorpus, load_corpus, load_manifest, prepare_corpus
from .evaluation import (
    EvalReport,
    TextCnnConfig,
    aggregate_runs,
    embedding_cosine_table,
    style_accuracy,
    train_style_classifier,
    uniqueness,
    verbatim_copy_rate,
)
from .ngram import diag_argmin_count, export_nll_tsv, fit_kn, nll_matrix
from .spectro import (
    export_embeddings_tsv,
    extract_artist_embeddings,
    load_embeddings_tsv,
    train_spectro_classifier,
)
from .vae import AUDIO_MODES, VaeModel, generate, train_vae

SPECTRO_CACHE = "spectrograms.ckpt"
SPECTRO_MODEL = "spectro.ckpt"
EMBEDDINGS_TSV = "artist_embeddings.tsv"


def prep_audio(cfg: RunConfig) -> Path:
    """Decode every wav, cut 10 s clips, cache their mel spectrograms."""
    root = cfg.audio_path()
    rows = load_manifest(root)
    params = cfg.audio.spectro_params()
    specs = []
    for dirname, artist in rows:
        audio_dir = root / "artists" / dirname / "audio"
        wavs = sorted(audio_dir.glob("*.wav")) if audio_dir.is_dir() else []
        if not wavs:
            raise FileNotFoundError(f"no wav files under {audio_dir}")
        for wav in wavs:
            samples, sr = decode_wav(wav.read_bytes())
            song_id = str(wav.relative_to(root))
            for clip in segment_clips(samples, sr, song_id, artist):
                specs.append(mel_spectrogram(clip, params))
    if not specs:
        raise ValueError("no clips produced; are the source files at least 10 s long?")
    out = cfg.out_path()
    out.mkdir(parents=True, exist_ok=True)
    cache = out / SPECTRO_CACHE
    save_spectrogram_cache(specs, [a for _, a in rows], cache)
    write_manifest(cfg, "prep-audio", {"cache": str(cache), "n_spectrograms": len(specs)})
    return cache


def train_spectro(cfg: RunConfig) -> dict:
    """Train the artist classifier on cached spectrograms, export embeddings."""
    cache = cfg.out_path() / SPECTRO_CACHE
    if not cache.is_file():
        prep_audio(cfg)
    specs, artists = load_spectrogram_cache(cache)
    shapes = {s.values.shape for s in specs}
    if len(shapes) != 1:
        raise ValueError(f"spectrogram shapes differ across clips: {sorted(shapes)}")
    train, valid, test = grouped_split(specs, seed=cfg.spectro.split_seed)
    config = cfg.spectro.cnn_config(next(iter(shapes)), len(artists))
    result = train_spectro_classifier(
        train,
        valid,
        test,
        config,
        epochs=cfg.spectro.epochs,
        batch_size=cfg.spectro.batch_size,
        lr=cfg.spectro.lr,
        seed=cfg.seeds[0],
    )
    emb = extract_artist_embeddings(result.model, train, artists)
    out = cfg.out_path()
    save_spectro_checkpoint(result.model, artists, out / SPECTRO_MODEL)
    (out / EMBEDDINGS_TSV).write_text(export_embeddings_tsv(emb), encoding="utf-8")
    report = {
        "test_accuracy": result.test_accuracy,
        "best_valid_accuracy": result.best_valid_accuracy,
        "initial_loss": result.initial_loss,
        "epoch_losses": result.epoch_losses,
        "n_train": len(train),
        "n_valid": len(valid),
        "n_test": len(test),
    }
    (out / "spectro_report.json").write_text(
        json.dumps(report, indent=2) + "\n", encoding="utf-8"
    )
    write_manifest(
        cfg,
        "train-spectro",
        {
            "model": str(out / SPECTRO_MODEL),
            "embeddings": str(out / EMBEDDINGS_TSV),
            "test_accuracy": result.test_accuracy,
        },
    )
    return report


def prepared_corpus(cfg: RunConfig) -> PreparedCorpus:
    artists, lines = load_corpus(cfg.corpus_path())
    return prepare_corpus(
        artists,
        lines,
        min_count=cfg.vae.min_count,
        max_line_len=cfg.vae.max_line_len,
        seed=cfg.vae.split_seed,
    )


def _audio_embeddings(cfg: RunConfig, mode: str):
    if mode not in AUDIO_MODES:
        return None
    tsv = cfg.out_path() / EMBEDDINGS_TSV
    if not tsv.is_file():
        raise FileNotFoundError(
            f"audio embeddings required for mode {mode}: run train-spectro first "
            f"(missing {tsv})"
        )
    emb = load_embeddings_tsv(tsv.read_text(encoding="utf-8"))
    if emb.provenance != "audio":
        raise ValueError(f"embeddings at {tsv} have provenance {emb.provenance!r}")
    return emb


def vae_checkpoint_path(cfg: RunConfig, mode: str, seed: int) -> Path:
    return cfg.out_path() / f"vae_{mode}_seed{seed}.ckpt"


def train_vae_runs(cfg: RunConfig, mode: str | None = None) -> list[Path]:
    """One VAE checkpoint per configured seed."""
    mode = mode or cfg.mode
    prep = prepared_corpus(cfg)
    embeddings = _audio_embeddings(cfg, mode)
    out = cfg.out_path()
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for seed in cfg.seeds:
        model, _ = train_vae(
            prep.vocab,
            prep.artists,
            prep.train,
            cfg.vae.vae_config(),
            mode,
            steps=cfg.vae.steps,
            batch_size=cfg.vae.batch_size,
            lr=cfg.vae.lr,
            seed=seed,
            artist_embeddings=embeddings,
        )
        path = vae_checkpoint_path(cfg, mode, seed)
        save_vae_checkpoint(model, path)
        paths.append(path)
    write_manifest(cfg, f"train-vae-{mode}", {"checkpoints": [str(p) for p in paths]})
    return paths


def evaluate_model(
    cfg: RunConfig,
    model: VaeModel,
    prep: PreparedCorpus,
    classifier,
    kn_models: list[ngram.KneserNeyModel],
    seed: int,
) -> EvalReport:
    """Metrics for one trained model: generate per artist, score everything."""
    n = cfg.evaluation.n_generate
    per_artist_lines: list[list[str]] = []
    for artist in prep.artists:
        per_artist_lines.append(
            generate(
                model,
                artist.index,
                n=n,
                temperature=cfg.evaluation.temperature,
                seed=seed * 1000 + artist.index,
            )
        )
    all_lines = [l for lines in per_artist_lines for l in lines]
    labels = [a.index for a in prep.artists for _ in range(n)]
    token_lines = [l.split() for l in all_lines]
    acc = style_accuracy(classifier, token_lines, labels)

    generated_tokens = [[l.split() for l in lines] for lines in per_artist_lines]
    # scoring needs nonempty token lists; degenerate empties count as UNK lines
    generated_tokens = [
        [toks if toks else ["<unk>"] for toks in lines] for lines in generated_tokens
    ]
    nll = nll_matrix(generated_tokens, kn_models)
    train_raw = [l.raw for l in prep.train_lines]
    cos_table, cos_pair = embedding_cosine_table(model.artist_emb.data)
    return EvalReport(
        mode=model.mode,
        artist_names=[a.name for a in prep.artists],
        style_accuracy=acc,
        nll=nll.tolist(),
        diag_argmin=float(diag_argmin_count(nll)),
        uniqueness=uniqueness(all_lines),
        verbatim_copy_rate=verbatim_copy_rate(all_lines, train_raw),
        seeds=[seed],
        cosine_table=cos_table.tolist(),
        cosine_top_pair=list(cos_pair),
    )


def evaluate_runs(cfg: RunConfig, mode: str | None = None) -> EvalReport:
    """Evaluate every per-seed checkpoint and aggregate the reports."""
    mode = mode or cfg.mode
    prep = prepared_corpus(cfg)
    missing = [
        str(vae_checkpoint_path(cfg, mode, seed))
        for seed in cfg.seeds
        if not vae_checkpoint_path(cfg, mode, seed).is_file()
    ]
    if missing:
        raise FileNotFoundError(
            f"missing VAE checkpoints (run train-vae first): {missing}"
        )
    classifier = train_style_classifier(
        prep,
        TextCnnConfig(
            n_classes=len(prep.artists),
            feature_maps=cfg.evaluation.classifier_feature_maps,
            word_emb_dim=cfg.evaluation.classifier_emb_dim,
            max_len=cfg.vae.max_line_len,
        ),
        epochs=cfg.evaluation.classifier_epochs,
        lr=cfg.evaluation.classifier_lr,
        seed=cfg.seeds[0],
    ).model
    by_artist: dict[int, list[list[str]]] = {a.index: [] for a in prep.artists}
    for line in prep.train_lines:
        by_artist[line.artist.index].append(line.tokens)
    kn_models = [
        fit_kn(by_artist[a.index], discount=cfg.evaluation.kn_discount)
        for a in prep.artists
    ]
    reports = []
    for seed in cfg.seeds:
        model = load_vae_checkpoint(vae_checkpoint_path(cfg, mode, seed))
        reports.append(evaluate_model(cfg, model, prep, classifier, kn_models, seed))
    report = aggregate_runs(reports)
    out = cfg.out_path()
    out.mkdir(parents=True, exist_ok=True)
    (out / f"eval_{mode}.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (out / f"nll_{mode}.tsv").write_text(
        export_nll_tsv(np.asarray(report.nll), report.artist_names), encoding="utf-8"
    )
    write_manifest(
        cfg,
        f"evaluate-{mode}",
        {
            "report": str(out / f"eval_{mode}.json"),
            "nll_tsv": str(out / f"nll_{mode}.tsv"),
            "style_accuracy": report.style_accuracy,
            "diag_argmin": report.diag_argmin,
        },
    )
    return report
