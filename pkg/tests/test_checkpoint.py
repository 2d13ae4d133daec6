import numpy as np
import pytest

from lyra import vae as V
from lyra.checkpoint import (
    checkpoint_bytes,
    load_checkpoint,
    load_spectro_checkpoint,
    load_spectrogram_cache,
    load_vae_checkpoint,
    parse_checkpoint,
    save_checkpoint,
    save_spectro_checkpoint,
    save_spectrogram_cache,
    save_vae_checkpoint,
)
from lyra.corpus import ArtistId
from lyra.fixtures import FIXTURE_SPECTRO_PARAMS, tone_spectrograms
from lyra.spectro import SpectroCnn, SpectroCnnConfig

from test_vae import TINY, tiny_setup


def sample_payload():
    rng = np.random.default_rng(0)
    tensors = {
        "w1": rng.normal(size=(3, 4)),
        "b1": rng.normal(size=4),
        "deep.w": rng.normal(size=(2, 2, 2)),
    }
    metadata = {"kind": "test", "note": "héllo", "values": [1, 2.5, None]}
    return tensors, metadata


def test_round_trip_restores_tensors_at_f32_precision(tmp_path):
    tensors, metadata = sample_payload()
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, tensors, metadata)
    loaded, meta = load_checkpoint(path)
    assert meta == metadata
    for name, arr in tensors.items():
        np.testing.assert_array_equal(loaded[name], arr.astype(np.float32).astype(np.float64))


def test_save_load_save_is_byte_identical(tmp_path):
    tensors, metadata = sample_payload()
    first = checkpoint_bytes(tensors, metadata)
    loaded, meta = parse_checkpoint(first)
    second = checkpoint_bytes(loaded, meta)
    assert first == second


def test_bad_magic_rejected():
    with pytest.raises(ValueError, match="invalid checkpoint"):
        parse_checkpoint(b"NOTMAGIC" + bytes(64))


def test_bad_version_rejected():
    tensors, metadata = sample_payload()
    data = bytearray(checkpoint_bytes(tensors, metadata))
    data[8] = 99
    with pytest.raises(ValueError, match="version"):
        parse_checkpoint(bytes(data))


def test_truncated_file_rejected():
    tensors, metadata = sample_payload()
    data = checkpoint_bytes(tensors, metadata)
    with pytest.raises(ValueError, match="invalid checkpoint"):
        parse_checkpoint(data[: len(data) - 7])


def test_trailing_bytes_rejected():
    tensors, metadata = sample_payload()
    data = checkpoint_bytes(tensors, metadata)
    with pytest.raises(ValueError, match="trailing"):
        parse_checkpoint(data + b"x")


# ---------------------------------------------------------------------------
# model round trips
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("mode", ["onehot", "randT", "randNT"])
def test_vae_checkpoint_round_trip(tmp_path, mode):
    _, _, model = tiny_setup(mode=mode, seed=3)
    path = tmp_path / "vae.ckpt"
    save_vae_checkpoint(model, path)
    save_vae_checkpoint(load_vae_checkpoint(path), tmp_path / "vae2.ckpt")
    assert path.read_bytes() == (tmp_path / "vae2.ckpt").read_bytes()

    restored = load_vae_checkpoint(path)
    assert restored.mode == mode
    assert restored.vocab.token_of == model.vocab.token_of
    assert [a.name for a in restored.artists] == [a.name for a in model.artists]
    assert restored.artist_emb.requires_grad == model.artist_emb.requires_grad


def test_vae_generation_survives_round_trip(tmp_path):
    _, encoded, model = tiny_setup(mode="randT", seed=9)
    path = tmp_path / "vae.ckpt"
    save_vae_checkpoint(model, path)
    restored = load_vae_checkpoint(path)
    again = tmp_path / "vae_again.ckpt"
    save_vae_checkpoint(restored, again)
    twice = load_vae_checkpoint(again)
    a = V.generate(restored, artist=0, n=4, temperature=0.0, seed=5)
    b = V.generate(twice, artist=0, n=4, temperature=0.0, seed=5)
    assert a == b


def test_audio_mode_round_trip(tmp_path):
    from lyra.spectro import ArtistEmbeddingMatrix

    vocab, _, _ = tiny_setup()
    emb = ArtistEmbeddingMatrix(
        matrix=np.random.default_rng(1).normal(size=(2, TINY.artist_emb_dim)),
        provenance="audio",
        artist_names=["Alpha", "Beta"],
    )
    model = V.VaeModel(
        vocab,
        [ArtistId(0, "Alpha"), ArtistId(1, "Beta")],
        TINY,
        "audioNT",
        artist_embeddings=emb,
    )
    path = tmp_path / "vae.ckpt"
    save_vae_checkpoint(model, path)
    restored = load_vae_checkpoint(path)
    assert restored.mode == "audioNT"
    assert not restored.artist_emb.requires_grad
    np.testing.assert_array_equal(
        restored.artist_emb.data, emb.matrix.astype(np.float32).astype(np.float64)
    )


def test_spectro_checkpoint_round_trip(tmp_path):
    config = SpectroCnnConfig(
        input_shape=(12, 16), n_classes=2, conv_channels=(3,), head_sizes=(8, 5)
    )
    model = SpectroCnn(config, seed=2)
    artists = [ArtistId(0, "Alpha", "Electronic"), ArtistId(1, "Beta", "Hard Rock")]
    path = tmp_path / "spectro.ckpt"
    save_spectro_checkpoint(model, artists, path)
    restored, loaded_artists = load_spectro_checkpoint(path)
    assert [a.name for a in loaded_artists] == ["Alpha", "Beta"]
    x = np.random.default_rng(3).random((2, 12, 16))
    quantized = SpectroCnn(config, seed=2)
    quantized.load_state_arrays(
        {k: v.astype(np.float32).astype(np.float64) for k, v in model.state_arrays().items()}
    )
    np.testing.assert_array_equal(restored.predict(x), quantized.predict(x))


def test_spectrogram_cache_round_trip(tmp_path):
    artists = [ArtistId(0, "Alpha"), ArtistId(1, "Beta")]
    specs = tone_spectrograms(artists, n_songs=3, clips_per_song=1, seed=4)
    path = tmp_path / "cache.ckpt"
    save_spectrogram_cache(specs, artists, path)
    loaded, loaded_artists = load_spectrogram_cache(path)
    assert len(loaded) == len(specs)
    assert [a.name for a in loaded_artists] == ["Alpha", "Beta"]
    for a, b in zip(loaded, specs):
        assert a.song_id == b.song_id
        assert a.artist.index == b.artist.index
        assert a.params == FIXTURE_SPECTRO_PARAMS
        np.testing.assert_array_equal(
            a.values, b.values.astype(np.float32).astype(np.float64)
        )


def test_wrong_kind_rejected(tmp_path):
    tensors, metadata = sample_payload()
    path = tmp_path / "x.ckpt"
    save_checkpoint(path, tensors, metadata)
    with pytest.raises(ValueError, match="expected vae"):
        load_vae_checkpoint(path)


def test_independent_reader_can_parse_the_format():
    """Re-parse with raw struct calls only, per the documented layout."""
    import json
    import struct

    tensors, metadata = sample_payload()
    data = checkpoint_bytes(tensors, metadata)
    pos = 0
    assert data[:8] == b"LYRACKPT"
    pos = 8
    (version,) = struct.unpack_from("<I", data, pos)
    pos += 4
    assert version == 1
    (meta_len,) = struct.unpack_from("<Q", data, pos)
    pos += 8
    meta = json.loads(data[pos : pos + meta_len].decode("utf-8"))
    pos += meta_len
    assert meta == metadata
    (count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    seen = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", data, pos)
        pos += 2
        name = data[pos : pos + name_len].decode("utf-8")
        pos += name_len
        (ndim,) = struct.unpack_from("<B", data, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", data, pos)
        pos += 4 * ndim
        n = int(np.prod(shape)) if ndim else 1
        values = struct.unpack_from(f"<{n}f", data, pos)
        pos += 4 * n
        seen[name] = np.array(values).reshape(shape)
    assert pos == len(data)
    assert sorted(seen) == sorted(tensors)
    for name in tensors:
        np.testing.assert_array_equal(
            seen[name], tensors[name].astype(np.float32).astype(np.float64)
        )
