import json

import pytest

from lyra.cli import main
from lyra.config import RunConfig, save_config
from lyra.fixtures import synthetic_token_corpus, write_audio_dir, write_corpus_dir


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Corpus + audio fixture directory and a desk-scale config file."""
    root = tmp_path_factory.mktemp("ws")
    artists, lines = synthetic_token_corpus(n_per_artist=60, seed=5)
    write_corpus_dir(root / "data", artists, lines)
    write_audio_dir(root / "data", artists, n_songs=4, seconds=21.0, sr=8000, seed=5)
    cfg = RunConfig(
        corpus_dir=str(root / "data"),
        out_dir=str(root / "out"),
        mode="randNT",
        seeds=[3, 4],
    )
    cfg.audio.n_fft = 512
    cfg.audio.hop = 512
    cfg.audio.n_mels = 32
    cfg.spectro.conv_channels = [4, 8]
    cfg.spectro.head_sizes = [24, 12, 8]
    cfg.spectro.epochs = 2
    cfg.vae.word_emb_dim = 12
    cfg.vae.encoder_hidden = 8
    cfg.vae.latent_dim = 4
    cfg.vae.decoder_hidden = 12
    cfg.vae.artist_emb_dim = 8
    cfg.vae.min_count = 1
    cfg.vae.max_line_len = 10
    cfg.vae.steps = 25
    cfg.evaluation.n_generate = 8
    cfg.evaluation.classifier_epochs = 2
    cfg.evaluation.classifier_feature_maps = 8
    cfg.evaluation.classifier_emb_dim = 8
    path = root / "config.json"
    save_config(cfg, path)
    return root, path, cfg


def test_prep_audio_writes_cache(workspace, capsys):
    root, config_path, cfg = workspace
    assert main(["prep-audio", str(config_path)]) == 0
    assert (root / "out" / "spectrograms.ckpt").is_file()
    manifest = json.loads((root / "out" / "manifest_prep-audio.json").read_text())
    # 4 songs x 2 clips x 2 artists
    assert manifest["outputs"]["n_spectrograms"] == 16


def test_train_spectro_writes_artifacts(workspace):
    root, config_path, cfg = workspace
    assert main(["train-spectro", str(config_path)]) == 0
    assert (root / "out" / "spectro.ckpt").is_file()
    tsv = (root / "out" / "artist_embeddings.tsv").read_text()
    assert tsv.startswith("#provenance\taudio")
    report = json.loads((root / "out" / "spectro_report.json").read_text())
    assert 0.0 <= report["test_accuracy"] <= 1.0


def _ensure_trained(root, config_path):
    if not (root / "out" / "vae_randNT_seed3.ckpt").is_file():
        assert main(["train-vae", str(config_path)]) == 0


def test_train_vae_writes_one_checkpoint_per_seed(workspace):
    root, config_path, cfg = workspace
    assert main(["train-vae", str(config_path)]) == 0
    for seed in (3, 4):
        assert (root / "out" / f"vae_randNT_seed{seed}.ckpt").is_file()


def test_train_vae_audio_mode_requires_embeddings(tmp_path, workspace, capsys):
    root, config_path, cfg = workspace
    bare = RunConfig(
        corpus_dir=cfg.corpus_dir, out_dir=str(tmp_path / "fresh"), seeds=[1]
    )
    bare.vae.steps = 1
    bare.vae.min_count = 1
    cfg_path = tmp_path / "bare.json"
    save_config(bare, cfg_path)
    code = main(["train-vae", str(cfg_path), "--mode", "audioT"])
    assert code == 1
    assert "audio embeddings required" in capsys.readouterr().err


def test_generate_deterministic_output(workspace, capsys):
    root, config_path, cfg = workspace
    _ensure_trained(root, config_path)
    ckpt = str(root / "out" / "vae_randNT_seed3.ckpt")
    args = ["generate", ckpt, "--artist", "Aurora Vex", "--n", "5",
            "--temperature", "0", "--seed", "7"]
    assert main(args) == 0
    first = capsys.readouterr().out
    assert main(args) == 0
    second = capsys.readouterr().out
    assert first == second
    assert len(first.strip().split("\n")) == 5


def test_generate_unknown_artist_fails(workspace, capsys):
    root, config_path, cfg = workspace
    _ensure_trained(root, config_path)
    ckpt = str(root / "out" / "vae_randNT_seed3.ckpt")
    code = main(["generate", ckpt, "--artist", "Nobody", "--n", "1"])
    assert code == 1
    assert "unknown artist" in capsys.readouterr().err


def test_evaluate_emits_report_and_tsv(workspace, capsys):
    root, config_path, cfg = workspace
    _ensure_trained(root, config_path)
    assert main(["evaluate", str(config_path)]) == 0
    report = json.loads((root / "out" / "eval_randNT.json").read_text())
    assert report["n_runs"] == 2
    assert report["seeds"] == [3, 4]
    assert len(report["nll"]) == 2 and len(report["nll"][0]) == 2
    tsv = (root / "out" / "nll_randNT.tsv").read_text()
    assert tsv.splitlines()[0] == "\tAurora Vex\tGranite Choir"
    assert 0.0 <= report["style_accuracy"] <= 1.0
    assert 0.0 < report["uniqueness"] <= 1.0


def test_missing_config_is_reported(capsys):
    code = main(["evaluate", "/nonexistent/config.json"])
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_unknown_mode_rejected_by_parser(workspace):
    root, config_path, cfg = workspace
    with pytest.raises(SystemExit) as exc:
        main(["train-vae", str(config_path), "--mode", "bogus"])
    assert exc.value.code == 2
