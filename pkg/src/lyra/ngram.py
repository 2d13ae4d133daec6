"""Interpolated Kneser-Ney trigram language models, one per artist.

Highest order interpolates discounted raw trigram counts with a bigram
distribution built on continuation counts, which in turn interpolates with
a continuation-count unigram, which interpolates with a uniform
distribution over the vocabulary (UNK included) so no probability is ever
zero. Lines are scored with double-BOS padding and a terminal EOS.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

LM_BOS = "<bos>"
LM_EOS = "<eos>"
LM_UNK = "<unk>"


@dataclass
class KneserNeyModel:
    discount: float
    vocab: set[str]  # surface tokens, UNK included, BOS/EOS excluded
    event_space: tuple[str, ...]  # vocab + EOS, the outcomes of every P(.|ctx)
    tri: dict[tuple[str, str, str], int]
    tri_ctx_total: dict[tuple[str, str], int]
    tri_ctx_types: dict[tuple[str, str], int]
    cont2: dict[tuple[str, str], int]  # distinct u with (u,v,w) observed
    cont2_ctx_total: dict[str, int]
    cont2_ctx_types: dict[str, int]
    cont1: dict[str, int]  # distinct v with continuation pair (v,w)
    cont1_total: int = 0
    cont1_types: int = 0

    def map_token(self, token: str) -> str:
        return token if token in self.vocab else LM_UNK


def fit_kn(lines: list[list[str]], discount: float = 0.75) -> KneserNeyModel:
    """Fit an interpolated Kneser-Ney trigram model on tokenized lines."""
    if not 0.0 < discount < 1.0:
        raise ValueError(f"discount must be in (0,1), got {discount}")
    lines = [line for line in lines if line]
    if not lines:
        raise ValueError("empty corpus")
    tri: Counter = Counter()
    vocab: set[str] = {LM_UNK}
    for tokens in lines:
        vocab.update(tokens)
        padded = [LM_BOS, LM_BOS] + list(tokens) + [LM_EOS]
        for i in range(2, len(padded)):
            tri[(padded[i - 2], padded[i - 1], padded[i])] += 1

    tri_ctx_total: Counter = Counter()
    tri_ctx_types: Counter = Counter()
    cont2_set: set[tuple[str, str, str]] = set(tri)
    for (u, v, w), c in tri.items():
        tri_ctx_total[(u, v)] += c
        tri_ctx_types[(u, v)] += 1

    cont2: Counter = Counter()
    for u, v, w in cont2_set:
        cont2[(v, w)] += 1
    cont2_ctx_total: Counter = Counter()
    cont2_ctx_types: Counter = Counter()
    for (v, w), c in cont2.items():
        cont2_ctx_total[v] += c
        cont2_ctx_types[v] += 1

    cont1: Counter = Counter()
    for v, w in cont2:
        cont1[w] += 1
    cont1_total = sum(cont1.values())
    cont1_types = len(cont1)

    event_space = tuple(sorted(vocab)) + (LM_EOS,)
    return KneserNeyModel(
        discount=discount,
        vocab=vocab,
        event_space=event_space,
        tri=dict(tri),
        tri_ctx_total=dict(tri_ctx_total),
        tri_ctx_types=dict(tri_ctx_types),
        cont2=dict(cont2),
        cont2_ctx_total=dict(cont2_ctx_total),
        cont2_ctx_types=dict(cont2_ctx_types),
        cont1=dict(cont1),
        cont1_total=cont1_total,
        cont1_types=cont1_types,
    )


def _prob_unigram(model: KneserNeyModel, w: str) -> float:
    d = model.discount
    uniform = 1.0 / len(model.event_space)
    if model.cont1_total == 0:
        return uniform
    num = max(model.cont1.get(w, 0) - d, 0.0)
    lam = d * model.cont1_types / model.cont1_total
    return num / model.cont1_total + lam * uniform


def _prob_bigram(model: KneserNeyModel, v: str, w: str) -> float:
    d = model.discount
    total = model.cont2_ctx_total.get(v, 0)
    if total == 0:
        return _prob_unigram(model, w)
    num = max(model.cont2.get((v, w), 0) - d, 0.0)
    lam = d * model.cont2_ctx_types[v] / total
    return num / total + lam * _prob_unigram(model, w)


def prob(model: KneserNeyModel, w: str, context: tuple[str, str]) -> float:
    """P(w | u, v); tokens must already be UNK-mapped where appropriate."""
    u, v = context
    d = model.discount
    total = model.tri_ctx_total.get((u, v), 0)
    if total == 0:
        return _prob_bigram(model, v, w)
    num = max(model.tri.get((u, v, w), 0) - d, 0.0)
    lam = d * model.tri_ctx_types[(u, v)] / total
    return num / total + lam * _prob_bigram(model, v, w)


def logprob_line(model: KneserNeyModel, tokens: list[str]) -> float:
    """Sum of ln P(w_t | w_{t-2}, w_{t-1}) over the padded line, in nats."""
    if not tokens:
        raise ValueError("empty line")
    mapped = [model.map_token(t) for t in tokens]
    padded = [LM_BOS, LM_BOS] + mapped + [LM_EOS]
    total = 0.0
    for i in range(2, len(padded)):
        total += math.log(prob(model, padded[i], (padded[i - 2], padded[i - 1])))
    return total


def nll_matrix(
    generated: list[list[list[str]]], models: list[KneserNeyModel]
) -> np.ndarray:
    """Entry (i, j): mean per-line NLL of artist i's lines under model j, nats."""
    k = len(models)
    if len(generated) != k:
        raise ValueError(
            f"need one line set per model: {len(generated)} sets, {k} models"
        )
    out = np.zeros((k, k))
    for i, lines in enumerate(generated):
        if not lines:
            raise ValueError(f"empty line set for artist index {i}")
        for j, model in enumerate(models):
            out[i, j] = -np.mean([logprob_line(model, line) for line in lines])
    return out


def diag_argmin_count(matrix: np.ndarray) -> int:
    """Rows whose unique minimum sits on the diagonal; diagonal ties don't count."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"matrix must be square, got {matrix.shape}")
    count = 0
    for i in range(matrix.shape[0]):
        row = matrix[i]
        m = row.min()
        if row[i] == m and (row == m).sum() == 1:
            count += 1
    return count


def export_nll_tsv(matrix: np.ndarray, names: list[str]) -> str:
    """TSV with artist names as row/column headers, 2-decimal table style."""
    matrix = np.asarray(matrix)
    lines = ["\t" + "\t".join(names)]
    for name, row in zip(names, matrix):
        lines.append(name + "\t" + "\t".join(f"{x:.2f}" for x in row))
    return "\n".join(lines) + "\n"
