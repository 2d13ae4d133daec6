"""Artist classification from spectrograms and embedding distillation.

A small convolutional stack (trained from scratch) feeds the
512/128/50-unit fully-connected head; the post-activation output of the
50-unit layer is the penultimate representation. Per-artist embeddings are
the mean penultimate vector over that artist's training clips.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .audio import FLOOR_DB, Spectrogram
from .corpus import ArtistId
from .layers import dense, dense_params, glorot


@dataclass
class SpectroCnnConfig:
    input_shape: tuple[int, int]  # (n_mels, n_frames)
    n_classes: int
    conv_channels: tuple[int, ...] = (8, 16, 32, 64)
    head_sizes: tuple[int, ...] = (512, 128, 50)
    dropout: float = 0.30

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0,1), got {self.dropout}")
        if len(self.head_sizes) < 1:
            raise ValueError("head needs at least one layer")
        h, w = self.input_shape
        for i, _ in enumerate(self.conv_channels):
            h, w = h - 2, w - 2  # 3x3 valid conv
            if h < 1 or w < 1:
                raise ValueError(
                    f"input {self.input_shape} too small for conv block {i}"
                )
            h, w = h // 2, w // 2  # 2x2 pool
            if h < 1 or w < 1:
                raise ValueError(
                    f"input {self.input_shape} too small for pool in block {i}"
                )
        self.conv_out = (h, w)

    @property
    def embedding_dim(self) -> int:
        return self.head_sizes[-1]


@dataclass
class ArtistEmbeddingMatrix:
    matrix: np.ndarray  # (K, dim)
    provenance: str  # audio | random | onehot
    artist_names: list[str]

    def __post_init__(self):
        if self.provenance not in ("audio", "random", "onehot"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("embedding matrix contains non-finite values")
        if len(self.artist_names) != self.matrix.shape[0]:
            raise ValueError("one row per artist required")
        if self.provenance == "onehot" and not np.array_equal(
            self.matrix, np.eye(self.matrix.shape[0])
        ):
            raise ValueError("onehot embeddings must be the identity")


def random_embeddings(artist_names: list[str], dim: int, seed: int) -> ArtistEmbeddingMatrix:
    rng = np.random.default_rng(seed)
    return ArtistEmbeddingMatrix(
        matrix=rng.normal(scale=0.5, size=(len(artist_names), dim)),
        provenance="random",
        artist_names=list(artist_names),
    )


def onehot_embeddings(artist_names: list[str]) -> ArtistEmbeddingMatrix:
    return ArtistEmbeddingMatrix(
        matrix=np.eye(len(artist_names)),
        provenance="onehot",
        artist_names=list(artist_names),
    )


def spectrogram_input(spec: Spectrogram) -> np.ndarray:
    """Rescale the dB matrix from [-80, 0] to [0, 1] for the classifier."""
    return (spec.values - FLOOR_DB) / -FLOOR_DB


class SpectroCnn:
    def __init__(self, config: SpectroCnnConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        self.params: dict[str, ad.Tensor] = {}
        in_c = 1
        for i, out_c in enumerate(config.conv_channels):
            fan_in, fan_out = in_c * 9, out_c * 9
            self.params[f"conv{i}.w"] = ad.Tensor(
                glorot(rng, fan_in, fan_out, shape=(out_c, in_c, 3, 3)),
                requires_grad=True,
            )
            self.params[f"conv{i}.b"] = ad.Tensor(np.zeros(out_c), requires_grad=True)
            in_c = out_c
        h, w = config.conv_out
        n_in = in_c * h * w
        for i, n_out in enumerate(config.head_sizes):
            wt, bt = dense_params(rng, n_in, n_out)
            self.params[f"fc{i}.w"], self.params[f"fc{i}.b"] = wt, bt
            n_in = n_out
        wt, bt = dense_params(rng, n_in, config.n_classes)
        self.params["out.w"], self.params["out.b"] = wt, bt

    def parameters(self) -> list[ad.Tensor]:
        return list(self.params.values())

    def forward(
        self,
        x: np.ndarray,
        train: bool = False,
        rng: np.random.Generator | None = None,
    ) -> tuple[ad.Tensor, ad.Tensor]:
        """x is (B, H, W) in [0,1]; returns (logits, penultimate activations)."""
        cfg = self.config
        if x.ndim != 3 or x.shape[1:] != cfg.input_shape:
            raise ValueError(
                f"expected input (B, {cfg.input_shape[0]}, {cfg.input_shape[1]}), got {x.shape}"
            )
        t = ad.Tensor(x[:, None, :, :])
        for i in range(len(cfg.conv_channels)):
            t = ad.conv2d(t, self.params[f"conv{i}.w"], self.params[f"conv{i}.b"])
            t = ad.relu(t)
            t = ad.max_pool2d(t)
        b = x.shape[0]
        t = ad.reshape(t, (b, -1))
        hidden = t
        for i in range(len(cfg.head_sizes)):
            hidden = ad.relu(
                dense(hidden, self.params[f"fc{i}.w"], self.params[f"fc{i}.b"])
            )
            is_last = i == len(cfg.head_sizes) - 1
            if train and cfg.dropout > 0 and not is_last:
                hidden = ad.dropout(hidden, cfg.dropout, rng)
        penultimate = hidden
        if train and cfg.dropout > 0:
            hidden = ad.dropout(hidden, cfg.dropout, rng)
        logits = dense(hidden, self.params["out.w"], self.params["out.b"])
        return logits, penultimate

    def predict(self, x: np.ndarray) -> np.ndarray:
        with ad.no_grad():
            logits, _ = self.forward(x)
        return logits.data.argmax(axis=1)

    def penultimate(self, x: np.ndarray) -> np.ndarray:
        with ad.no_grad():
            _, pen = self.forward(x)
        return pen.data

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.params.items()}

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for k, t in self.params.items():
            t.data = np.array(arrays[k], dtype=np.float64)


@dataclass
class SpectroTrainResult:
    model: SpectroCnn
    test_accuracy: float
    best_valid_accuracy: float
    # inference-mode mean cross-entropy on the train set, at init and per epoch
    epoch_losses: list[float] = field(default_factory=list)
    initial_loss: float = 0.0


def _accuracy(model: SpectroCnn, x: np.ndarray, y: np.ndarray, batch: int = 32) -> float:
    hits = 0
    for i in range(0, len(x), batch):
        hits += int((model.predict(x[i : i + batch]) == y[i : i + batch]).sum())
    return hits / len(x)


def _stack(specs: list[Spectrogram]) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([spectrogram_input(s) for s in specs])
    y = np.array([s.artist.index for s in specs], dtype=np.int64)
    return x, y


def train_spectro_classifier(
    train: list[Spectrogram],
    valid: list[Spectrogram],
    test: list[Spectrogram],
    config: SpectroCnnConfig,
    epochs: int = 20,
    batch_size: int = 16,
    lr: float = 1e-3,
    seed: int = 0,
) -> SpectroTrainResult:
    """Train with Adam; keep the best-validation-accuracy snapshot."""
    present = {s.artist.index for s in train}
    if present != set(range(config.n_classes)):
        missing = sorted(set(range(config.n_classes)) - present)
        raise ValueError(f"artists missing from train split: {missing}")
    children = np.random.SeedSequence(seed).spawn(3)
    shuffle_rng = np.random.default_rng(children[1])
    drop_rng = np.random.default_rng(children[2])
    model = SpectroCnn(config, seed=int(children[0].generate_state(1)[0]))
    opt = ad.Adam(model.parameters(), lr=lr)
    x_train, y_train = _stack(train)
    x_valid, y_valid = _stack(valid)
    x_test, y_test = _stack(test)

    def train_set_loss() -> float:
        total = 0.0
        with ad.no_grad():
            for i in range(0, len(x_train), 32):
                logits, _ = model.forward(x_train[i : i + 32])
                ce = ad.softmax_cross_entropy(logits, y_train[i : i + 32])
                total += ce.item() * len(x_train[i : i + 32])
        return total / len(x_train)

    initial_loss = train_set_loss()
    best_acc, best_state = -1.0, model.state_arrays()
    epoch_losses = []
    for _ in range(epochs):
        order = shuffle_rng.permutation(len(x_train))
        for i in range(0, len(order), batch_size):
            idx = order[i : i + batch_size]
            opt.zero_grad()
            logits, _ = model.forward(x_train[idx], train=True, rng=drop_rng)
            loss = ad.softmax_cross_entropy(logits, y_train[idx])
            ad.backward(loss)
            opt.step()
        epoch_losses.append(train_set_loss())
        acc = _accuracy(model, x_valid, y_valid)
        if acc > best_acc:
            best_acc = acc
            best_state = model.state_arrays()
    model.load_state_arrays(best_state)
    test_accuracy = _accuracy(model, x_test, y_test)
    return SpectroTrainResult(
        model=model,
        test_accuracy=test_accuracy,
        best_valid_accuracy=best_acc,
        epoch_losses=epoch_losses,
        initial_loss=initial_loss,
    )


def extract_artist_embeddings(
    model: SpectroCnn,
    train_specs: list[Spectrogram],
    artists: list[ArtistId],
    batch_size: int = 32,
) -> ArtistEmbeddingMatrix:
    """Row a = mean penultimate vector over artist a's training clips."""
    dim = model.config.embedding_dim
    sums = np.zeros((len(artists), dim))
    counts = np.zeros(len(artists), dtype=np.int64)
    for i in range(0, len(train_specs), batch_size):
        chunk = train_specs[i : i + batch_size]
        x = np.stack([spectrogram_input(s) for s in chunk])
        pens = model.penultimate(x)
        for s, pen in zip(chunk, pens):
            sums[s.artist.index] += pen
            counts[s.artist.index] += 1
    if np.any(counts == 0):
        empty = [artists[i].name for i in np.flatnonzero(counts == 0)]
        raise ValueError(f"artists with zero training clips: {empty}")
    return ArtistEmbeddingMatrix(
        matrix=sums / counts[:, None],
        provenance="audio",
        artist_names=[a.name for a in artists],
    )


def export_embeddings_tsv(emb: ArtistEmbeddingMatrix) -> str:
    lines = [f"#provenance\t{emb.provenance}"]
    for name, row in zip(emb.artist_names, emb.matrix):
        lines.append(name + "\t" + "\t".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def load_embeddings_tsv(text: str) -> ArtistEmbeddingMatrix:
    lines = [l for l in text.splitlines() if l.strip()]
    provenance = "audio"
    if lines and lines[0].startswith("#provenance\t"):
        provenance = lines[0].split("\t", 1)[1]
        lines = lines[1:]
    names, rows = [], []
    for line in lines:
        parts = line.split("\t")
        names.append(parts[0])
        rows.append([float(v) for v in parts[1:]])
    return ArtistEmbeddingMatrix(
        matrix=np.array(rows), provenance=provenance, artist_names=names
    )
