import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lyra import corpus
from lyra.corpus import (
    BOS,
    EOS,
    PAD,
    UNK,
    ArtistId,
    Line,
    build_vocabulary,
    decode_ids,
    encode_line,
    split_corpus,
    tokenize_line,
)

A0 = ArtistId(0, "Alpha", "Electronic")
A1 = ArtistId(1, "Beta", "Art Rock")


def make_lines(texts, artist=A0):
    return [Line(raw=t, tokens=tokenize_line(t), artist=artist) for t in texts]


# ---------------------------------------------------------------------------
# tokenizer
# ---------------------------------------------------------------------------


def test_tokenize_plain_line():
    assert tokenize_line("oh i want to shake the sun") == [
        "oh", "i", "want", "to", "shake", "the", "sun",
    ]


def test_tokenize_empty():
    assert tokenize_line("") == []


def test_tokenize_case_and_punctuation():
    assert tokenize_line("I'm DRIFTING, away!!") == ["i'm", "drifting", "away"]


def test_tokenize_apostrophes_only_inside_words():
    assert tokenize_line("rock 'n' roll") == ["rock", "n", "roll"]
    assert tokenize_line("don''t") == ["don", "t"]
    assert tokenize_line("'") == []


def char_level_tokenize(text):
    """Independent character-walk reference for the tokenizer rules."""

    def alnum(c):
        return c != "_" and (c.isalpha() or c.isdigit())

    t = text.lower()
    tokens, cur = [], ""
    for i, c in enumerate(t):
        if alnum(c):
            cur += c
        elif (
            c == "'"
            and 0 < i < len(t) - 1
            and alnum(t[i - 1])
            and alnum(t[i + 1])
            and cur
        ):
            cur += c
        else:
            if cur:
                tokens.append(cur)
            cur = ""
    if cur:
        tokens.append(cur)
    return tokens


_ALPHABET = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789éüñà'.,!?;:-()\" \t"


@settings(max_examples=300)
@given(st.text(alphabet=_ALPHABET, max_size=60))
def test_tokenize_matches_char_level_reference(text):
    assert tokenize_line(text) == char_level_tokenize(text)


def test_no_token_contains_whitespace():
    for tok in tokenize_line("a  b\tc\nd calm down, now!"):
        assert not any(ch.isspace() for ch in tok)


# ---------------------------------------------------------------------------
# vocabulary
# ---------------------------------------------------------------------------


def test_vocabulary_min_count_1():
    vocab = build_vocabulary(make_lines(["a b", "a"]), min_count=1)
    assert vocab.size == 6
    assert set(vocab.token_of[4:]) == {"a", "b"}


def test_vocabulary_min_count_2():
    vocab = build_vocabulary(make_lines(["a b", "a"]), min_count=2)
    assert vocab.size == 5
    assert vocab.token_of[4:] == ["a"]


def test_vocabulary_specials_fixed():
    vocab = build_vocabulary(make_lines(["x"]), min_count=1)
    assert vocab.id_of["<pad>"] == PAD == 0
    assert vocab.id_of["<unk>"] == UNK == 1
    assert vocab.id_of["<bos>"] == BOS == 2
    assert vocab.id_of["<eos>"] == EOS == 3
    assert vocab.id_of["x"] == 4


def test_vocabulary_order_frequency_then_lexicographic():
    vocab = build_vocabulary(make_lines(["b c c a", "c"]), min_count=1)
    # c freq 3, then a/b tie at freq 1 resolved lexicographically
    assert vocab.token_of[4:] == ["c", "a", "b"]


def test_vocabulary_empty_corpus_errors():
    with pytest.raises(ValueError, match="empty corpus"):
        build_vocabulary([], min_count=1)


def test_vocabulary_deterministic_across_runs():
    lines = make_lines(["the sun goes down", "down by the sea", "the the the"])
    v1 = build_vocabulary(lines, min_count=1)
    v2 = build_vocabulary(list(lines), min_count=1)
    assert v1.token_of == v2.token_of


# ---------------------------------------------------------------------------
# encoding / decoding
# ---------------------------------------------------------------------------


@pytest.fixture
def small_vocab():
    return build_vocabulary(make_lines(["a b", "a"]), min_count=1)


def test_encode_framing(small_vocab):
    enc = encode_line(make_lines(["a b"])[0], small_vocab)
    a, b = small_vocab.id_of["a"], small_vocab.id_of["b"]
    assert enc.ids.tolist() == [BOS, a, b, EOS]
    assert enc.length == 2


def test_encode_oov_becomes_unk(small_vocab):
    enc = encode_line(make_lines(["a z"])[0], small_vocab)
    assert enc.ids.tolist() == [BOS, small_vocab.id_of["a"], UNK, EOS]


def test_encode_truncates_to_max_len(small_vocab):
    line = make_lines([" ".join(["a"] * 40)])[0]
    enc = encode_line(line, small_vocab, max_line_len=20)
    assert enc.length == 20
    assert len(enc.ids) == 22  # 20 content + BOS/EOS


def test_encode_empty_line_errors(small_vocab):
    with pytest.raises(ValueError, match="empty line"):
        encode_line(Line(raw="", tokens=[], artist=A0), small_vocab)


def test_decode_inverse_of_framing(small_vocab):
    a, b = small_vocab.id_of["a"], small_vocab.id_of["b"]
    assert decode_ids([BOS, a, b, EOS], small_vocab) == "a b"


def test_decode_empty_content(small_vocab):
    assert decode_ids([BOS, EOS], small_vocab) == ""


def test_decode_invalid_id(small_vocab):
    with pytest.raises(ValueError, match="invalid id"):
        decode_ids([BOS, 99, EOS], small_vocab)


def test_encode_decode_round_trip_many_random_lines():
    words = ["sun", "sea", "night", "gold", "drift", "shake", "i'm", "99"]
    lines = make_lines([" ".join(words)] * 2)
    vocab = build_vocabulary(lines, min_count=1)
    rng = np.random.default_rng(5)
    for _ in range(100):
        n = int(rng.integers(1, 12))
        toks = [words[i] for i in rng.integers(0, len(words), size=n)]
        line = Line(raw=" ".join(toks), tokens=toks, artist=A0)
        enc = encode_line(line, vocab, max_line_len=20)
        assert decode_ids(enc.ids, vocab) == " ".join(toks)


@settings(max_examples=100)
@given(st.lists(st.sampled_from(["sun", "sea", "gold", "i'm"]), min_size=1, max_size=15))
def test_round_trip_property(tokens):
    base = make_lines(["sun sea gold i'm"])
    vocab = build_vocabulary(base, min_count=1)
    line = Line(raw=" ".join(tokens), tokens=tokens, artist=A0)
    enc = encode_line(line, vocab, max_line_len=20)
    assert decode_ids(enc.ids, vocab) == " ".join(tokens)


# ---------------------------------------------------------------------------
# splits
# ---------------------------------------------------------------------------


def _numbered(n, artist):
    return make_lines([f"line number {i}" for i in range(n)], artist)


def test_split_sizes_single_artist():
    train, valid, test = split_corpus(_numbered(100, A0), seed=3)
    assert (len(train), len(valid), len(test)) == (80, 10, 10)


def test_split_same_seed_identical():
    lines = _numbered(50, A0) + _numbered(40, A1)
    s1 = split_corpus(lines, seed=9)
    s2 = split_corpus(lines, seed=9)
    for p1, p2 in zip(s1, s2):
        assert [l.raw for l in p1] == [l.raw for l in p2]


def test_split_stratified_two_artists():
    lines = _numbered(600, A0) + _numbered(400, A1)
    train, valid, test = split_corpus(lines, seed=1)
    per_artist = lambda part, a: sum(1 for l in part if l.artist is a)
    assert per_artist(train, A0) == 480
    assert per_artist(train, A1) == 320
    assert per_artist(valid, A0) == 60
    assert per_artist(test, A1) == 40


def test_split_partitions_disjoint_and_exhaustive():
    lines = _numbered(73, A0) + _numbered(41, A1)
    train, valid, test = split_corpus(lines, seed=2)
    ids = lambda part: {id(l) for l in part}
    assert not (ids(train) & ids(valid))
    assert not (ids(train) & ids(test))
    assert not (ids(valid) & ids(test))
    assert ids(train) | ids(valid) | ids(test) == ids(lines)


def test_split_stratification_within_one_line():
    lines = _numbered(37, A0) + _numbered(53, A1)
    train, _, _ = split_corpus(lines, seed=4)
    for artist, n in ((A0, 37), (A1, 53)):
        got = sum(1 for l in train if l.artist is artist)
        assert abs(got - 0.8 * n) <= 1


def test_split_rejects_tiny_artist():
    with pytest.raises(ValueError, match="artist too small"):
        split_corpus(_numbered(9, A0) + _numbered(20, A1))


def test_split_rejects_bad_fractions():
    with pytest.raises(ValueError, match="fractions"):
        split_corpus(_numbered(20, A0), fractions=(0.8, 0.1, 0.2))
