"""Synthetic desk-scale datasets: two-artist corpora and tone audio.

The token corpus gives each artist a disjoint vocabulary with a simple
chain structure so a conditioned decoder can learn "which half of the
vocabulary am I in" quickly. The tone dataset gives each artist a distinct
fundamental frequency, trivially separable from spectrograms.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .audio import SpectroParams, Spectrogram, encode_wav, mel_spectrogram, segment_clips
from .corpus import ArtistId, Line

ARTIST_SPECS = (
    ("aurora", "Aurora Vex", "Electronic"),
    ("granite", "Granite Choir", "Hard Rock"),
)


def artist_tokens(artist_index: int, vocab_per_artist: int = 30) -> list[str]:
    prefix = ("lumen", "grit")[artist_index % 2]
    return [f"{prefix}{i:02d}" for i in range(vocab_per_artist)]


def synthetic_token_corpus(
    n_per_artist: int = 200,
    vocab_per_artist: int = 30,
    seed: int = 0,
    min_len: int = 4,
    max_len: int = 8,
) -> tuple[list[ArtistId], list[Line]]:
    """Two artists with disjoint vocabularies and per-artist chain structure."""
    rng = np.random.default_rng(seed)
    artists = [
        ArtistId(index=i, name=name, genre=genre)
        for i, (_, name, genre) in enumerate(ARTIST_SPECS)
    ]
    lines: list[Line] = []
    for artist in artists:
        toks = artist_tokens(artist.index, vocab_per_artist)
        for _ in range(n_per_artist):
            length = int(rng.integers(min_len, max_len + 1))
            pos = int(rng.integers(0, vocab_per_artist))
            words = []
            for _ in range(length):
                words.append(toks[pos])
                pos = (pos + int(rng.integers(1, 3))) % vocab_per_artist
            raw = " ".join(words)
            lines.append(Line(raw=raw, tokens=words, artist=artist))
    return artists, lines


def write_corpus_dir(root: Path, artists: list[ArtistId], lines: list[Line]) -> None:
    root = Path(root)
    manifest = []
    dirnames = [spec[0] for spec in ARTIST_SPECS]
    for artist in artists:
        dirname = dirnames[artist.index]
        manifest.append(f"{dirname}\t{artist.name}\t{artist.genre or ''}")
        adir = root / "artists" / dirname
        adir.mkdir(parents=True, exist_ok=True)
        own = [l.raw for l in lines if l.artist.index == artist.index]
        (adir / "lyrics.txt").write_text("\n".join(own) + "\n", encoding="utf-8")
    (root / "artists.tsv").write_text("\n".join(manifest) + "\n", encoding="utf-8")


TONE_FREQS = (440.0, 1320.0)

FIXTURE_SPECTRO_PARAMS = SpectroParams(n_fft=512, hop=512, n_mels=32, fmin=0.0, fmax=None)


def tone_song(
    artist_index: int, sr: int, seconds: float, rng: np.random.Generator
) -> np.ndarray:
    """One synthetic song: fixed-class tone, varied amplitude/vibrato, noise."""
    t = np.arange(int(sr * seconds)) / sr
    freq = TONE_FREQS[artist_index] * (1.0 + 0.01 * rng.standard_normal())
    vibrato = 1.0 + 0.002 * np.sin(2 * np.pi * rng.uniform(0.1, 0.5) * t)
    amp = 0.4 + 0.2 * rng.random()
    wave = amp * np.sin(2 * np.pi * freq * vibrato * t + rng.uniform(0, 2 * np.pi))
    wave += 0.02 * rng.standard_normal(len(t))
    return np.clip(wave, -0.99, 0.99)


def tone_spectrograms(
    artists: list[ArtistId],
    n_songs: int = 10,
    clips_per_song: int = 3,
    sr: int = 8000,
    params: SpectroParams = FIXTURE_SPECTRO_PARAMS,
    seed: int = 0,
) -> list[Spectrogram]:
    rng = np.random.default_rng(seed)
    specs: list[Spectrogram] = []
    seconds = 10.0 * clips_per_song + 1.0  # trailing second gets dropped
    for artist in artists:
        for s in range(n_songs):
            samples = tone_song(artist.index, sr, seconds, rng)
            song_id = f"{artist.name}/song{s:02d}"
            for clip in segment_clips(samples, sr, song_id, artist):
                specs.append(mel_spectrogram(clip, params))
    return specs


def write_audio_dir(
    root: Path,
    artists: list[ArtistId],
    n_songs: int = 4,
    seconds: float = 21.0,
    sr: int = 8000,
    seed: int = 0,
) -> None:
    """WAV files under artists/<dir>/audio/, matching the corpus layout."""
    rng = np.random.default_rng(seed)
    dirnames = [spec[0] for spec in ARTIST_SPECS]
    for artist in artists:
        adir = Path(root) / "artists" / dirnames[artist.index] / "audio"
        adir.mkdir(parents=True, exist_ok=True)
        for s in range(n_songs):
            samples = tone_song(artist.index, sr, seconds, rng)
            (adir / f"song{s:02d}.wav").write_bytes(encode_wav(samples, sr))
