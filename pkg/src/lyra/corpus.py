"""Lyric corpus handling: tokenization, vocabularies, encoding, splits.

Tokenization is lowercase, keeps apostrophes between alphanumerics, strips
all other punctuation, and splits on whitespace. Vocabulary ids are
assigned deterministically (descending frequency, ties lexicographic) above
four fixed specials.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PAD, UNK, BOS, EOS = 0, 1, 2, 3
SPECIAL_TOKENS = ("<pad>", "<unk>", "<bos>", "<eos>")

# A token is a run of alphanumerics, possibly with apostrophes strictly
# inside it ("i'm"); underscores count as punctuation.
_TOKEN_RE = re.compile(r"[^\W_]+(?:'[^\W_]+)*", re.UNICODE)


@dataclass(frozen=True)
class ArtistId:
    index: int
    name: str
    genre: str | None = None


@dataclass
class Line:
    raw: str
    tokens: list[str]
    artist: ArtistId


@dataclass
class Vocabulary:
    id_of: dict[str, int]
    token_of: list[str]
    min_count: int

    @property
    def size(self) -> int:
        return len(self.token_of)

    def encode_token(self, token: str) -> int:
        return self.id_of.get(token, UNK)


@dataclass
class EncodedLine:
    ids: np.ndarray  # int64, BOS ... EOS
    artist: ArtistId
    length: int  # content tokens, excluding BOS/EOS

    @property
    def content(self) -> np.ndarray:
        return self.ids[1:-1]


def tokenize_line(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def build_vocabulary(lines: list[Line], min_count: int = 2) -> Vocabulary:
    if not lines:
        raise ValueError("empty corpus")
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    counts: Counter[str] = Counter()
    for line in lines:
        counts.update(line.tokens)
    kept = sorted(
        (tok for tok, c in counts.items() if c >= min_count),
        key=lambda tok: (-counts[tok], tok),
    )
    token_of = list(SPECIAL_TOKENS) + kept
    id_of = {tok: i for i, tok in enumerate(token_of)}
    return Vocabulary(id_of=id_of, token_of=token_of, min_count=min_count)


def encode_line(line: Line, vocab: Vocabulary, max_line_len: int = 20) -> EncodedLine:
    if not line.tokens:
        raise ValueError("empty line")
    tokens = line.tokens[:max_line_len]
    ids = [BOS] + [vocab.encode_token(t) for t in tokens] + [EOS]
    return EncodedLine(
        ids=np.asarray(ids, dtype=np.int64), artist=line.artist, length=len(tokens)
    )


def decode_ids(ids, vocab: Vocabulary) -> str:
    out = []
    for i in np.asarray(ids, dtype=np.int64).tolist():
        if i < 0 or i >= vocab.size:
            raise ValueError(f"invalid id {i} for vocabulary of size {vocab.size}")
        if i >= len(SPECIAL_TOKENS):
            out.append(vocab.token_of[i])
    return " ".join(out)


def split_corpus(
    lines: list[Line],
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> tuple[list[Line], list[Line], list[Line]]:
    """Seed-deterministic, per-artist stratified train/valid/test split."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {fractions}")
    by_artist: dict[int, list[Line]] = {}
    for line in lines:
        by_artist.setdefault(line.artist.index, []).append(line)
    rng = np.random.default_rng(seed)
    train: list[Line] = []
    valid: list[Line] = []
    test: list[Line] = []
    for idx in sorted(by_artist):
        group = by_artist[idx]
        if len(group) < 10:
            raise ValueError(
                f"artist too small to stratify: index {idx} has {len(group)} lines"
            )
        order = rng.permutation(len(group))
        n = len(group)
        cut1 = round(n * fractions[0])
        cut2 = round(n * (fractions[0] + fractions[1]))
        train.extend(group[i] for i in order[:cut1])
        valid.extend(group[i] for i in order[cut1:cut2])
        test.extend(group[i] for i in order[cut2:])
    return train, valid, test


def load_manifest(root: Path) -> list[tuple[str, ArtistId]]:
    """Read artists.tsv rows (directory, display name, genre) in file order."""
    manifest = root / "artists.tsv"
    if not manifest.is_file():
        raise FileNotFoundError(f"missing manifest: {manifest}")
    rows: list[tuple[str, ArtistId]] = []
    for raw in manifest.read_text(encoding="utf-8").splitlines():
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if len(parts) < 2:
            raise ValueError(f"malformed manifest row: {raw!r}")
        dirname, name = parts[0], parts[1]
        genre = parts[2] if len(parts) > 2 and parts[2] else None
        rows.append((dirname, ArtistId(index=len(rows), name=name, genre=genre)))
    if len(rows) < 2:
        raise ValueError(f"need at least 2 artists, found {len(rows)}")
    return rows


def load_corpus(root: str | Path) -> tuple[list[ArtistId], list[Line]]:
    """Load artists/<dir>/lyrics.txt for every manifest row; skip empty lines."""
    root = Path(root)
    rows = load_manifest(root)
    artists = [artist for _, artist in rows]
    lines: list[Line] = []
    for dirname, artist in rows:
        path = root / "artists" / dirname / "lyrics.txt"
        if not path.is_file():
            raise FileNotFoundError(f"missing lyrics file: {path}")
        for raw in path.read_text(encoding="utf-8").splitlines():
            tokens = tokenize_line(raw)
            if tokens:
                lines.append(Line(raw=raw, tokens=tokens, artist=artist))
    return artists, lines


@dataclass
class PreparedCorpus:
    """Everything downstream training needs, derived once from raw lines."""

    artists: list[ArtistId]
    vocab: Vocabulary
    train: list[EncodedLine]
    valid: list[EncodedLine]
    test: list[EncodedLine]
    train_lines: list[Line] = field(default_factory=list)


def prepare_corpus(
    artists: list[ArtistId],
    lines: list[Line],
    min_count: int = 2,
    max_line_len: int = 20,
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> PreparedCorpus:
    train_l, valid_l, test_l = split_corpus(lines, fractions=fractions, seed=seed)
    vocab = build_vocabulary(train_l, min_count=min_count)
    enc = lambda ls: [encode_line(l, vocab, max_line_len) for l in ls]
    return PreparedCorpus(
        artists=artists,
        vocab=vocab,
        train=enc(train_l),
        valid=enc(valid_l),
        test=enc(test_l),
        train_lines=train_l,
    )
