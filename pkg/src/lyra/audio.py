"""Audio front end: WAV decoding, clip segmentation, log-mel spectrograms.

Spectrograms are dB matrices normalized per clip (max cell -> 0 dB, floor
-80 dB). Dataset splits happen at song granularity so clips of one song
never straddle partitions.
"""

from __future__ import annotations

import io
import wave
from dataclasses import dataclass

import numpy as np

from .corpus import ArtistId

CLIP_SECONDS = 10
FLOOR_DB = -80.0

SongId = str


@dataclass
class SpectroParams:
    n_fft: int = 2048
    hop: int = 512
    n_mels: int = 128
    fmin: float = 0.0
    fmax: float | None = None  # None -> sample_rate / 2

    def resolved_fmax(self, sample_rate: int) -> float:
        return self.fmax if self.fmax is not None else sample_rate / 2.0


@dataclass
class AudioClip:
    samples: np.ndarray  # float64 mono in [-1, 1]
    sample_rate: int
    song_id: SongId
    artist: ArtistId
    clip_index: int

    def __post_init__(self):
        if len(self.samples) != CLIP_SECONDS * self.sample_rate:
            raise ValueError(
                f"clip must be exactly {CLIP_SECONDS}s: "
                f"{len(self.samples)} samples at {self.sample_rate} Hz"
            )
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("clip contains non-finite samples")


@dataclass
class MelFilterbank:
    weights: np.ndarray  # (n_mels, n_fft//2 + 1)
    fmin: float
    fmax: float
    n_mels: int


@dataclass
class Spectrogram:
    values: np.ndarray  # (n_mels, n_frames), dB in [FLOOR_DB, 0]
    song_id: SongId
    artist: ArtistId
    clip_index: int
    params: SpectroParams
    sample_rate: int


def decode_wav(data: bytes) -> tuple[np.ndarray, int]:
    """Decode 16-bit PCM RIFF/WAVE bytes to mono float64 in [-1, 1)."""
    try:
        with wave.open(io.BytesIO(data), "rb") as wf:
            n_channels = wf.getnchannels()
            sampwidth = wf.getsampwidth()
            comptype = wf.getcomptype()
            sample_rate = wf.getframerate()
            frames = wf.readframes(wf.getnframes())
    except (wave.Error, EOFError) as err:
        raise ValueError(f"unsupported wav: {err}") from err
    if comptype != "NONE" or sampwidth != 2 or n_channels not in (1, 2):
        raise ValueError(
            f"unsupported wav: need 16-bit PCM mono/stereo, got "
            f"{sampwidth * 8}-bit {comptype} with {n_channels} channels"
        )
    pcm = np.frombuffer(frames, dtype="<i2").astype(np.float64)
    if n_channels == 2:
        pcm = pcm.reshape(-1, 2).mean(axis=1)
    return pcm / 32768.0, sample_rate


def encode_wav(samples: np.ndarray, sample_rate: int, n_channels: int = 1) -> bytes:
    """Inverse of decode_wav for fixtures: float [-1,1] -> 16-bit PCM bytes."""
    pcm = np.clip(np.round(samples * 32768.0), -32768, 32767).astype("<i2")
    buf = io.BytesIO()
    with wave.open(buf, "wb") as wf:
        wf.setnchannels(n_channels)
        wf.setsampwidth(2)
        wf.setframerate(sample_rate)
        wf.writeframes(pcm.tobytes())
    return buf.getvalue()


def segment_clips(
    samples: np.ndarray, sample_rate: int, song_id: SongId, artist: ArtistId
) -> list[AudioClip]:
    """Consecutive non-overlapping 10 s windows; the trailing remainder is dropped."""
    window = CLIP_SECONDS * sample_rate
    n_clips = len(samples) // window
    return [
        AudioClip(
            samples=np.asarray(samples[i * window : (i + 1) * window], dtype=np.float64),
            sample_rate=sample_rate,
            song_id=song_id,
            artist=artist,
            clip_index=i,
        )
        for i in range(n_clips)
    ]


def hann_window(n: int) -> np.ndarray:
    # periodic Hann, the standard analysis window for STFT
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def stft_magnitude(samples: np.ndarray, n_fft: int, hop: int) -> np.ndarray:
    """Power spectrogram, (n_frames, n_fft//2 + 1); Hann-windowed frames."""
    samples = np.asarray(samples, dtype=np.float64)
    if n_fft <= 0 or (n_fft & (n_fft - 1)) != 0:
        raise ValueError(f"n_fft must be a power of two, got {n_fft}")
    if len(samples) < n_fft:
        raise ValueError(
            f"signal too short: {len(samples)} samples < n_fft={n_fft}"
        )
    n_frames = 1 + (len(samples) - n_fft) // hop
    window = hann_window(n_fft)
    idx = np.arange(n_fft)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = samples[idx] * window
    spectrum = np.fft.rfft(frames, axis=1)
    return np.abs(spectrum) ** 2


def mel_of_hz(f) -> np.ndarray:
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def hz_of_mel(m) -> np.ndarray:
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(
    n_mels: int, n_fft: int, sample_rate: int, fmin: float = 0.0, fmax: float | None = None
) -> MelFilterbank:
    """Triangular filters with peaks uniformly spaced on the mel axis."""
    fmax = sample_rate / 2.0 if fmax is None else fmax
    if not (0 <= fmin < fmax <= sample_rate / 2.0):
        raise ValueError(f"invalid frequency range: fmin={fmin}, fmax={fmax}")
    if n_mels < 2:
        raise ValueError(f"n_mels must be >= 2, got {n_mels}")
    edges_hz = hz_of_mel(np.linspace(mel_of_hz(fmin), mel_of_hz(fmax), n_mels + 2))
    bin_hz = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    weights = np.zeros((n_mels, n_fft // 2 + 1))
    for m in range(n_mels):
        lo, mid, hi = edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]
        rising = (bin_hz - lo) / (mid - lo)
        falling = (hi - bin_hz) / (hi - mid)
        weights[m] = np.maximum(0.0, np.minimum(rising, falling))
        if not weights[m].any():
            raise ValueError(
                f"mel band {m} covers no FFT bin; reduce n_mels or raise n_fft"
            )
    return MelFilterbank(weights=weights, fmin=fmin, fmax=fmax, n_mels=n_mels)


def mel_spectrogram(clip: AudioClip, params: SpectroParams) -> Spectrogram:
    """Log-mel spectrogram, per-clip max normalized, clamped to [-80, 0] dB."""
    power = stft_magnitude(clip.samples, params.n_fft, params.hop)
    fb = mel_filterbank(
        params.n_mels,
        params.n_fft,
        clip.sample_rate,
        params.fmin,
        params.resolved_fmax(clip.sample_rate),
    )
    mel_power = fb.weights @ power.T  # (n_mels, n_frames)
    peak = mel_power.max()
    if peak <= 0.0:
        values = np.full(mel_power.shape, FLOOR_DB)
    else:
        ratio = np.maximum(mel_power / peak, 10.0 ** (FLOOR_DB / 10.0))
        values = 10.0 * np.log10(ratio)
    return Spectrogram(
        values=values,
        song_id=clip.song_id,
        artist=clip.artist,
        clip_index=clip.clip_index,
        params=params,
        sample_rate=clip.sample_rate,
    )


def grouped_split(
    spectrograms: list[Spectrogram],
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> tuple[list[Spectrogram], list[Spectrogram], list[Spectrogram]]:
    """Song-grouped, per-artist stratified, seed-deterministic split.

    Within each artist the first three shuffled songs seed train/valid/test
    (so no partition is empty), then each remaining song goes to the
    partition with the largest clip-count deficit.
    """
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {fractions}")
    by_artist: dict[int, dict[SongId, list[Spectrogram]]] = {}
    for s in spectrograms:
        by_artist.setdefault(s.artist.index, {}).setdefault(s.song_id, []).append(s)
    rng = np.random.default_rng(seed)
    parts: tuple[list[Spectrogram], ...] = ([], [], [])
    for idx in sorted(by_artist):
        songs = sorted(by_artist[idx])
        if len(songs) < 3:
            raise ValueError(
                f"cannot group-split: artist index {idx} has {len(songs)} songs"
            )
        order = rng.permutation(len(songs))
        total_clips = sum(len(by_artist[idx][s]) for s in songs)
        targets = [f * total_clips for f in fractions]
        assigned = [0.0, 0.0, 0.0]
        for rank, song_pos in enumerate(order):
            song = songs[song_pos]
            clips = by_artist[idx][song]
            if rank < 3:
                part = rank
            else:
                deficits = [targets[p] - assigned[p] for p in range(3)]
                part = int(np.argmax(deficits))
            parts[part].extend(clips)
            assigned[part] += len(clips)
    return parts
