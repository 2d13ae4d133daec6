"""Binary checkpoint container and model (de)serialization.

Layout, all integers little-endian:

    magic        8 bytes  b"LYRACKPT"
    version      uint32   currently 1
    meta_len     uint64   length of the metadata block
    metadata     UTF-8 JSON (sorted keys, compact separators)
    n_tensors    uint32
    records, sorted by name:
        name_len uint16, name UTF-8
        ndim     uint8, dims uint32 each
        payload  float32, C order

Training runs in float64; tensors are quantized to float32 on disk, so
save -> load -> save is byte-identical and post-load behavior is defined
at 32-bit precision.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .audio import SpectroParams, Spectrogram
from .corpus import ArtistId, Vocabulary
from .spectro import ArtistEmbeddingMatrix, SpectroCnn, SpectroCnnConfig
from .vae import AUDIO_MODES, VaeConfig, VaeModel

MAGIC = b"LYRACKPT"
VERSION = 1


def checkpoint_bytes(tensors: dict[str, np.ndarray], metadata: dict) -> bytes:
    meta = json.dumps(metadata, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", VERSION), struct.pack("<Q", len(meta)), meta]
    parts.append(struct.pack("<I", len(tensors)))
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype=np.float32)
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes(order="C"))
    return b"".join(parts)


def save_checkpoint(path, tensors: dict[str, np.ndarray], metadata: dict) -> None:
    Path(path).write_bytes(checkpoint_bytes(tensors, metadata))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ValueError("invalid checkpoint: truncated file")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def parse_checkpoint(data: bytes) -> tuple[dict[str, np.ndarray], dict]:
    r = _Reader(data)
    if r.take(len(MAGIC)) != MAGIC:
        raise ValueError("invalid checkpoint: bad magic bytes")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise ValueError(f"invalid checkpoint: version {version}, expected {VERSION}")
    (meta_len,) = r.unpack("<Q")
    try:
        metadata = json.loads(r.take(meta_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise ValueError(f"invalid checkpoint: bad metadata ({err})") from err
    (count,) = r.unpack("<I")
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}I")
        n_items = int(np.prod(shape)) if ndim else 1
        payload = r.take(n_items * 4)
        arr = np.frombuffer(payload, dtype="<f4").reshape(shape)
        tensors[name] = arr.astype(np.float64)
    if r.pos != len(r.data):
        raise ValueError("invalid checkpoint: trailing bytes")
    return tensors, metadata


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    return parse_checkpoint(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# model-level helpers
# ---------------------------------------------------------------------------


def _artists_meta(artists: list[ArtistId]) -> list[dict]:
    return [{"index": a.index, "name": a.name, "genre": a.genre} for a in artists]


def _artists_from_meta(meta: list[dict]) -> list[ArtistId]:
    return [ArtistId(index=m["index"], name=m["name"], genre=m.get("genre")) for m in meta]


def save_vae_checkpoint(model: VaeModel, path) -> None:
    metadata = {
        "kind": "vae",
        "mode": model.mode,
        "config": {
            "word_emb_dim": model.config.word_emb_dim,
            "encoder_hidden": model.config.encoder_hidden,
            "latent_dim": model.config.latent_dim,
            "decoder_hidden": model.config.decoder_hidden,
            "artist_emb_dim": model.config.artist_emb_dim,
            "word_dropout": model.config.word_dropout,
            "kl_anneal_steps": model.config.kl_anneal_steps,
            "max_decode_len": model.config.max_decode_len,
        },
        "vocab": {"tokens": model.vocab.token_of, "min_count": model.vocab.min_count},
        "artists": _artists_meta(model.artists),
        "artist_provenance": model.artist_provenance,
    }
    tensors = {name: t.data for name, t in model.named_params().items()}
    save_checkpoint(path, tensors, metadata)


def load_vae_checkpoint(path) -> VaeModel:
    tensors, metadata = load_checkpoint(path)
    if metadata.get("kind") != "vae":
        raise ValueError(f"invalid checkpoint: kind {metadata.get('kind')!r}, expected vae")
    vocab_meta = metadata["vocab"]
    vocab = Vocabulary(
        id_of={tok: i for i, tok in enumerate(vocab_meta["tokens"])},
        token_of=list(vocab_meta["tokens"]),
        min_count=vocab_meta["min_count"],
    )
    artists = _artists_from_meta(metadata["artists"])
    config = VaeConfig(**metadata["config"])
    mode = metadata["mode"]
    embeddings = None
    if mode in AUDIO_MODES:
        embeddings = ArtistEmbeddingMatrix(
            matrix=tensors["artist_emb"],
            provenance="audio",
            artist_names=[a.name for a in artists],
        )
    model = VaeModel(vocab, artists, config, mode, seed=0, artist_embeddings=embeddings)
    for name, t in model.named_params().items():
        loaded = tensors[name]
        if loaded.shape != t.data.shape:
            raise ValueError(
                f"invalid checkpoint: tensor {name} has shape {loaded.shape}, "
                f"expected {t.data.shape}"
            )
        t.data = loaded.copy()
    return model


def save_spectrogram_cache(
    specs: list[Spectrogram], artists: list[ArtistId], path
) -> None:
    """Cache computed spectrograms so re-training skips the DSP stage."""
    clips = []
    tensors = {}
    for i, s in enumerate(specs):
        tensors[f"spec{i:06d}"] = s.values
        clips.append(
            {
                "song_id": s.song_id,
                "artist_index": s.artist.index,
                "clip_index": s.clip_index,
                "sample_rate": s.sample_rate,
                "params": {
                    "n_fft": s.params.n_fft,
                    "hop": s.params.hop,
                    "n_mels": s.params.n_mels,
                    "fmin": s.params.fmin,
                    "fmax": s.params.fmax,
                },
            }
        )
    metadata = {"kind": "spectrograms", "clips": clips, "artists": _artists_meta(artists)}
    save_checkpoint(path, tensors, metadata)


def load_spectrogram_cache(path) -> tuple[list[Spectrogram], list[ArtistId]]:
    tensors, metadata = load_checkpoint(path)
    if metadata.get("kind") != "spectrograms":
        raise ValueError(
            f"invalid checkpoint: kind {metadata.get('kind')!r}, expected spectrograms"
        )
    artists = _artists_from_meta(metadata["artists"])
    specs = []
    for i, clip in enumerate(metadata["clips"]):
        specs.append(
            Spectrogram(
                values=tensors[f"spec{i:06d}"],
                song_id=clip["song_id"],
                artist=artists[clip["artist_index"]],
                clip_index=clip["clip_index"],
                params=SpectroParams(**clip["params"]),
                sample_rate=clip["sample_rate"],
            )
        )
    return specs, artists


def save_spectro_checkpoint(model: SpectroCnn, artists: list[ArtistId], path) -> None:
    cfg = model.config
    metadata = {
        "kind": "spectro",
        "config": {
            "input_shape": list(cfg.input_shape),
            "n_classes": cfg.n_classes,
            "conv_channels": list(cfg.conv_channels),
            "head_sizes": list(cfg.head_sizes),
            "dropout": cfg.dropout,
        },
        "artists": _artists_meta(artists),
    }
    save_checkpoint(path, {k: t.data for k, t in model.params.items()}, metadata)


def load_spectro_checkpoint(path) -> tuple[SpectroCnn, list[ArtistId]]:
    tensors, metadata = load_checkpoint(path)
    if metadata.get("kind") != "spectro":
        raise ValueError(
            f"invalid checkpoint: kind {metadata.get('kind')!r}, expected spectro"
        )
    c = metadata["config"]
    config = SpectroCnnConfig(
        input_shape=tuple(c["input_shape"]),
        n_classes=c["n_classes"],
        conv_channels=tuple(c["conv_channels"]),
        head_sizes=tuple(c["head_sizes"]),
        dropout=c["dropout"],
    )
    model = SpectroCnn(config, seed=0)
    model.load_state_arrays(tensors)
    return model, _artists_from_meta(metadata["artists"])
