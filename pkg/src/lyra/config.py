"""Run configuration: one JSON document drives the whole pipeline.

Every field has a default; unknown keys are rejected so typos fail loudly.
Relative paths resolve against LYRA_DATA_DIR when set, else the current
directory. A run manifest (config hash + seeds + outputs) is written next
to each stage's artifacts so any stage can be reproduced bit-identically.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

from .audio import SpectroParams
from .spectro import SpectroCnnConfig
from .vae import CONDITIONING_MODES, VaeConfig

DATA_DIR_ENV = "LYRA_DATA_DIR"


@dataclass
class AudioSection:
    n_fft: int = 2048
    hop: int = 512
    n_mels: int = 128
    fmin: float = 0.0
    fmax: float | None = None

    def spectro_params(self) -> SpectroParams:
        return SpectroParams(
            n_fft=self.n_fft, hop=self.hop, n_mels=self.n_mels, fmin=self.fmin, fmax=self.fmax
        )


@dataclass
class SpectroSection:
    conv_channels: list[int] = field(default_factory=lambda: [8, 16, 32, 64])
    head_sizes: list[int] = field(default_factory=lambda: [512, 128, 50])
    dropout: float = 0.30
    epochs: int = 20
    batch_size: int = 16
    lr: float = 1e-3
    split_seed: int = 0

    def cnn_config(self, input_shape: tuple[int, int], n_classes: int) -> SpectroCnnConfig:
        return SpectroCnnConfig(
            input_shape=input_shape,
            n_classes=n_classes,
            conv_channels=tuple(self.conv_channels),
            head_sizes=tuple(self.head_sizes),
            dropout=self.dropout,
        )


@dataclass
class VaeSection:
    word_emb_dim: int = 300
    encoder_hidden: int = 100
    latent_dim: int = 64
    decoder_hidden: int = 256
    artist_emb_dim: int = 50
    word_dropout: float = 0.5
    kl_anneal_steps: int = 3000
    max_decode_len: int = 20
    steps: int = 5000
    batch_size: int = 16
    lr: float = 1e-3
    min_count: int = 2
    max_line_len: int = 20
    split_seed: int = 0
    word_embeddings_path: str | None = None

    def vae_config(self) -> VaeConfig:
        return VaeConfig(
            word_emb_dim=self.word_emb_dim,
            encoder_hidden=self.encoder_hidden,
            latent_dim=self.latent_dim,
            decoder_hidden=self.decoder_hidden,
            artist_emb_dim=self.artist_emb_dim,
            word_dropout=self.word_dropout,
            kl_anneal_steps=self.kl_anneal_steps,
            max_decode_len=self.max_decode_len,
        )


@dataclass
class EvalSection:
    n_generate: int = 100
    temperature: float = 1.0
    classifier_epochs: int = 10
    classifier_lr: float = 1e-3
    classifier_feature_maps: int = 100
    classifier_emb_dim: int = 300
    kn_discount: float = 0.75


@dataclass
class RunConfig:
    corpus_dir: str = "corpus"
    audio_dir: str | None = None  # defaults to corpus_dir (wavs live beside lyrics)
    out_dir: str = "runs"
    mode: str = "randNT"
    seeds: list[int] = field(default_factory=lambda: [11, 12, 13, 14, 15])
    audio: AudioSection = field(default_factory=AudioSection)
    spectro: SpectroSection = field(default_factory=SpectroSection)
    vae: VaeSection = field(default_factory=VaeSection)
    evaluation: EvalSection = field(default_factory=EvalSection)

    def __post_init__(self):
        if self.mode not in CONDITIONING_MODES:
            raise ValueError(
                f"unknown conditioning mode {self.mode!r}; choose from {CONDITIONING_MODES}"
            )
        if not self.seeds:
            raise ValueError("at least one seed is required")

    @property
    def run_count(self) -> int:
        return len(self.seeds)

    def data_root(self) -> Path:
        return Path(os.environ.get(DATA_DIR_ENV, "."))

    def resolve(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else self.data_root() / path

    def corpus_path(self) -> Path:
        return self.resolve(self.corpus_dir)

    def audio_path(self) -> Path:
        return self.resolve(self.audio_dir if self.audio_dir is not None else self.corpus_dir)

    def out_path(self) -> Path:
        return self.resolve(self.out_dir)


_SECTIONS = {
    "audio": AudioSection,
    "spectro": SpectroSection,
    "vae": VaeSection,
    "evaluation": EvalSection,
}


def _build(cls, data: dict, where: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValueError(f"unknown config keys in {where}: {sorted(unknown)}")
    return cls(**data)


def config_from_dict(data: dict) -> RunConfig:
    data = dict(data)
    kwargs = {}
    for key, cls in _SECTIONS.items():
        if key in data:
            section = data.pop(key)
            if not isinstance(section, dict):
                raise ValueError(f"config section {key!r} must be an object")
            kwargs[key] = _build(cls, section, key)
    cfg = _build(RunConfig, {**data, **kwargs}, "top level")
    return cfg


def config_to_dict(cfg: RunConfig) -> dict:
    return dataclasses.asdict(cfg)


def load_config(path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise ValueError(f"config is not valid JSON: {err}") from err
    return config_from_dict(data)


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(
        json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def config_hash(cfg: RunConfig) -> str:
    canonical = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_manifest(cfg: RunConfig, stage: str, outputs: dict) -> Path:
    out = cfg.out_path()
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "stage": stage,
        "config_sha256": config_hash(cfg),
        "seeds": list(cfg.seeds),
        "outputs": outputs,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    path = out / f"manifest_{stage}.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
