"""Automatic evaluation: style classifier, diversity metrics, aggregation.

The style classifier is a convolutional sentence classifier (parallel
filter widths, max-over-time pooling) trained on the original lyrics and
applied to generated lines. Uniqueness and copy metrics normalize lines
through the corpus tokenizer so whitespace and case noise don't matter.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .corpus import PAD, Line, PreparedCorpus, Vocabulary, tokenize_line
from .layers import dense, dense_params, glorot
from .spectro import ArtistEmbeddingMatrix


@dataclass
class TextCnnConfig:
    n_classes: int
    filter_widths: tuple[int, ...] = (3, 4, 5)
    feature_maps: int = 100
    dropout: float = 0.5
    word_emb_dim: int = 300
    max_len: int = 20

    def __post_init__(self):
        if min(self.filter_widths) > self.max_len:
            raise ValueError("smallest filter width exceeds the padded line length")


class TextCnn:
    """Kim-style sentence classifier over token-id sequences."""

    def __init__(self, vocab: Vocabulary, config: TextCnnConfig, seed: int = 0):
        self.vocab = vocab
        self.config = config
        rng = np.random.default_rng(seed)
        e, f = config.word_emb_dim, config.feature_maps
        self.params: dict[str, ad.Tensor] = {
            "word_emb": ad.Tensor(
                rng.normal(scale=0.1, size=(vocab.size, e)), requires_grad=True
            )
        }
        for w in config.filter_widths:
            self.params[f"conv{w}.w"] = ad.Tensor(
                glorot(rng, w * e, f, shape=(f, 1, w, e)), requires_grad=True
            )
            self.params[f"conv{w}.b"] = ad.Tensor(np.zeros(f), requires_grad=True)
        wt, bt = dense_params(rng, f * len(config.filter_widths), config.n_classes)
        self.params["out.w"], self.params["out.b"] = wt, bt

    def parameters(self) -> list[ad.Tensor]:
        return list(self.params.values())

    def encode_tokens(self, token_lines: list[list[str]]) -> np.ndarray:
        """Pad/truncate token lines to a fixed-width id matrix."""
        width = max(self.config.max_len, max(self.config.filter_widths))
        ids = np.full((len(token_lines), width), PAD, dtype=np.int64)
        for i, toks in enumerate(token_lines):
            for j, tok in enumerate(toks[: self.config.max_len]):
                ids[i, j] = self.vocab.encode_token(tok)
        return ids

    def forward(
        self,
        ids: np.ndarray,
        train: bool = False,
        rng: np.random.Generator | None = None,
    ) -> ad.Tensor:
        b, t = ids.shape
        emb = ad.embedding_lookup(self.params["word_emb"], ids)
        image = ad.reshape(emb, (b, 1, t, self.config.word_emb_dim))
        pooled = []
        for w in self.config.filter_widths:
            conv = ad.conv2d(image, self.params[f"conv{w}.w"], self.params[f"conv{w}.b"])
            conv = ad.relu(conv)  # (B, F, T-w+1, 1)
            flat = ad.reshape(conv, (b, self.config.feature_maps, t - w + 1))
            pooled.append(ad.reduce_max(flat, axis=2))
        features = ad.concat(pooled)
        if train and self.config.dropout > 0:
            features = ad.dropout(features, self.config.dropout, rng)
        return dense(features, self.params["out.w"], self.params["out.b"])

    def predict(self, token_lines: list[list[str]]) -> np.ndarray:
        ids = self.encode_tokens(token_lines)
        out = np.empty(len(token_lines), dtype=np.int64)
        with ad.no_grad():
            for i in range(0, len(ids), 64):
                out[i : i + 64] = self.forward(ids[i : i + 64]).data.argmax(axis=1)
        return out

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.params.items()}

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for k, t in self.params.items():
            t.data = np.array(arrays[k], dtype=np.float64)


@dataclass
class StyleClassifierResult:
    model: TextCnn
    test_accuracy: float
    majority_baseline: float
    best_valid_accuracy: float


def _line_sets(lines: list[Line]) -> tuple[list[list[str]], np.ndarray]:
    return [l.tokens for l in lines], np.array(
        [l.artist.index for l in lines], dtype=np.int64
    )


def train_style_classifier(
    prep: PreparedCorpus,
    config: TextCnnConfig | None = None,
    epochs: int = 8,
    batch_size: int = 32,
    lr: float = 1e-3,
    seed: int = 0,
) -> StyleClassifierResult:
    """Train on the original lyrics' train split; snapshot best valid accuracy."""
    k = len(prep.artists)
    config = config or TextCnnConfig(n_classes=k)
    train_toks = [list(prep.vocab.token_of[i] for i in line.content) for line in prep.train]
    train_y = np.array([line.artist.index for line in prep.train], dtype=np.int64)
    valid_toks = [list(prep.vocab.token_of[i] for i in line.content) for line in prep.valid]
    valid_y = np.array([line.artist.index for line in prep.valid], dtype=np.int64)
    test_toks = [list(prep.vocab.token_of[i] for i in line.content) for line in prep.test]
    test_y = np.array([line.artist.index for line in prep.test], dtype=np.int64)
    counts = np.bincount(train_y, minlength=k)
    if np.any(counts == 0):
        raise ValueError(f"classes with zero training lines: {np.flatnonzero(counts == 0).tolist()}")

    children = np.random.SeedSequence(seed).spawn(3)
    model = TextCnn(prep.vocab, config, seed=int(children[0].generate_state(1)[0]))
    shuffle_rng = np.random.default_rng(children[1])
    drop_rng = np.random.default_rng(children[2])
    opt = ad.Adam(model.parameters(), lr=lr)
    x_train = model.encode_tokens(train_toks)

    best_acc, best_state = -1.0, model.state_arrays()
    for _ in range(epochs):
        order = shuffle_rng.permutation(len(x_train))
        for i in range(0, len(order), batch_size):
            idx = order[i : i + batch_size]
            opt.zero_grad()
            loss = ad.softmax_cross_entropy(
                model.forward(x_train[idx], train=True, rng=drop_rng), train_y[idx]
            )
            ad.backward(loss)
            opt.step()
        acc = float((model.predict(valid_toks) == valid_y).mean())
        if acc > best_acc:
            best_acc, best_state = acc, model.state_arrays()
    model.load_state_arrays(best_state)
    test_accuracy = float((model.predict(test_toks) == test_y).mean())
    majority = int(np.argmax(counts))
    majority_baseline = float((test_y == majority).mean())
    return StyleClassifierResult(
        model=model,
        test_accuracy=test_accuracy,
        majority_baseline=majority_baseline,
        best_valid_accuracy=best_acc,
    )


def style_accuracy(predict_fn, token_lines: list[list[str]], labels) -> float:
    """Fraction of lines whose predicted artist matches the conditioning one."""
    labels = np.asarray(labels, dtype=np.int64)
    if len(token_lines) != len(labels):
        raise ValueError("one label per line required")
    if len(token_lines) == 0:
        raise ValueError("empty evaluation set")
    predictor = predict_fn.predict if hasattr(predict_fn, "predict") else predict_fn
    preds = np.asarray(predictor(token_lines), dtype=np.int64)
    return float((preds == labels).mean())


# ---------------------------------------------------------------------------
# diversity metrics
# ---------------------------------------------------------------------------


def normalize_line(line: str) -> str:
    return " ".join(tokenize_line(line))


def uniqueness(lines: list[str]) -> float:
    """|distinct normalized lines| / |lines|."""
    if not lines:
        raise ValueError("empty line list")
    return len({normalize_line(l) for l in lines}) / len(lines)


def verbatim_copy_rate(generated: list[str], training: list[str]) -> float:
    """Fraction of generated lines appearing verbatim (normalized) in training."""
    if not generated or not training:
        raise ValueError("generated and training sets must be nonempty")
    corpus = {normalize_line(l) for l in training}
    hits = sum(1 for l in generated if normalize_line(l) in corpus)
    return hits / len(generated)


def _top_pair(table: np.ndarray) -> tuple[int, int]:
    k = len(table)
    best, pair = -np.inf, (0, 1)
    for i in range(k):
        for j in range(i + 1, k):
            if table[i, j] > best:
                best, pair = table[i, j], (i, j)
    return pair


def embedding_cosine_table(
    emb: ArtistEmbeddingMatrix | np.ndarray,
) -> tuple[np.ndarray, tuple[int, int]]:
    """Pairwise cosine similarities between artist rows plus the top i<j pair."""
    matrix = emb.matrix if isinstance(emb, ArtistEmbeddingMatrix) else np.asarray(emb)
    norms = np.linalg.norm(matrix, axis=1)
    if np.any(norms == 0):
        raise ValueError(f"zero-norm embedding rows: {np.flatnonzero(norms == 0).tolist()}")
    unit = matrix / norms[:, None]
    table = unit @ unit.T
    np.fill_diagonal(table, 1.0)
    return table, _top_pair(table)


def cohens_kappa(ann1, ann2) -> float:
    """Chance-corrected agreement for two binary annotation vectors."""
    a = np.asarray(ann1, dtype=np.int64)
    b = np.asarray(ann2, dtype=np.int64)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 1:
        raise ValueError(f"annotation vectors must share a length >= 1: {a.shape} vs {b.shape}")
    if not (np.isin(a, (0, 1)).all() and np.isin(b, (0, 1)).all()):
        raise ValueError("annotations must be binary")
    po = float((a == b).mean())
    pa, pb = float(a.mean()), float(b.mean())
    pe = pa * pb + (1 - pa) * (1 - pb)
    if pe == 1.0:
        return 0.0
    return (po - pe) / (1 - pe)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass
class EvalReport:
    mode: str
    artist_names: list[str]
    style_accuracy: float
    nll: list[list[float]]
    diag_argmin: float
    uniqueness: float
    verbatim_copy_rate: float
    seeds: list[int]
    n_runs: int = 1
    cosine_table: list[list[float]] | None = None
    cosine_top_pair: list[int] | None = None

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "artist_names": list(self.artist_names),
            "style_accuracy": self.style_accuracy,
            "nll": [list(row) for row in self.nll],
            "diag_argmin": self.diag_argmin,
            "uniqueness": self.uniqueness,
            "verbatim_copy_rate": self.verbatim_copy_rate,
            "seeds": list(self.seeds),
            "n_runs": self.n_runs,
            "cosine_table": self.cosine_table,
            "cosine_top_pair": self.cosine_top_pair,
        }

    @staticmethod
    def from_dict(d: dict) -> "EvalReport":
        return EvalReport(**d)


def _mean(values) -> float:
    # exact idempotence: the mean of identical values is that value
    if all(v == values[0] for v in values[1:]):
        return float(values[0])
    return float(np.mean(values))


def _mean_matrix(matrices) -> np.ndarray:
    stack = np.asarray(matrices, dtype=np.float64)
    if np.all(stack == stack[0]):
        return stack[0]
    return stack.mean(axis=0)


def aggregate_runs(reports: list[EvalReport]) -> EvalReport:
    """Entrywise/scalar means across seeded runs; seeds concatenate."""
    if not reports:
        raise ValueError("no reports to aggregate")
    first = reports[0]
    for r in reports[1:]:
        if r.mode != first.mode or r.artist_names != first.artist_names:
            raise ValueError("reports disagree on mode or artist set")
        if np.shape(r.nll) != np.shape(first.nll):
            raise ValueError("reports disagree on NLL matrix shape")
    mean = _mean
    nll = _mean_matrix([r.nll for r in reports])
    cosines = [r.cosine_table for r in reports if r.cosine_table is not None]
    cos_table = None
    cos_pair = None
    if len(cosines) == len(reports):
        cos = _mean_matrix(cosines)
        cos_table = cos.tolist()
        cos_pair = list(_top_pair(cos))
    return EvalReport(
        mode=first.mode,
        artist_names=list(first.artist_names),
        style_accuracy=mean([r.style_accuracy for r in reports]),
        nll=nll.tolist(),
        diag_argmin=mean([r.diag_argmin for r in reports]),
        uniqueness=mean([r.uniqueness for r in reports]),
        verbatim_copy_rate=mean([r.verbatim_copy_rate for r in reports]),
        seeds=[s for r in reports for s in r.seeds],
        n_runs=sum(r.n_runs for r in reports),
        cosine_table=cos_table,
        cosine_top_pair=cos_pair,
    )


# ---------------------------------------------------------------------------
# annotation sheets
# ---------------------------------------------------------------------------


def export_annotation_sheet(
    per_model: dict[str, list[str]], n: int = 100, seed: int = 0
) -> tuple[list[str], list[str]]:
    """Blind evaluation sheet: n lines per model, provenance-hidden shuffle.

    Returns (rows, key) where key[i] names the model that produced rows[i];
    the key is meant to be written to a separate sealed file.
    """
    rng = np.random.default_rng(seed)
    entries: list[tuple[str, str]] = []
    for model_name in sorted(per_model):
        lines = per_model[model_name]
        if len(lines) < n:
            raise ValueError(
                f"model {model_name!r} supplies {len(lines)} lines, need {n}"
            )
        picked = rng.choice(len(lines), size=n, replace=False)
        entries.extend((lines[i], model_name) for i in picked)
    order = rng.permutation(len(entries))
    rows = [entries[i][0] for i in order]
    key = [entries[i][1] for i in order]
    return rows, key


def write_annotation_sheet(rows: list[str], key: list[str], sheet_path, key_path) -> None:
    """Plain-text sheet for annotators; the row->model key goes to a sealed file."""
    Path(sheet_path).write_text("\n".join(rows) + "\n", encoding="utf-8")
    Path(key_path).write_text(
        "\n".join(f"{i}\t{m}" for i, m in enumerate(key)) + "\n", encoding="utf-8"
    )
