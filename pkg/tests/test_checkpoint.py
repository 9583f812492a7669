import numpy as np
import pytest

from gaitevo.checkpoint import (
    CheckpointError,
    decode_rng,
    encode_rng,
    load_arrays,
    save_arrays,
)


def test_round_trip_bitwise(tmp_path):
    rng = np.random.default_rng(0)
    arrays = {
        "a/w": rng.normal(size=(7, 3)),
        "a/b": rng.normal(size=3),
        "scalar": np.array([42.0]),
        "cube": rng.normal(size=(2, 3, 4)),
    }
    path = tmp_path / "x.ckpt"
    save_arrays(path, arrays)
    back = load_arrays(path)
    assert set(back) == set(arrays)
    for k in arrays:
        assert back[k].shape == arrays[k].shape
        assert back[k].tobytes() == arrays[k].tobytes()


def test_double_round_trip_identical_bytes(tmp_path):
    arrays = {"x": np.linspace(0, 1, 17), "y": np.array([[1.5, -2.5]])}
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_arrays(p1, arrays)
    save_arrays(p2, load_arrays(p1))
    assert p1.read_bytes() == p2.read_bytes()


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"NOTMAGIC" + b"\x00" * 16)
    with pytest.raises(CheckpointError):
        load_arrays(path)


def test_trailing_garbage_rejected(tmp_path):
    path = tmp_path / "x.ckpt"
    save_arrays(path, {"a": np.zeros(2)})
    path.write_bytes(path.read_bytes() + b"extra")
    with pytest.raises(CheckpointError):
        load_arrays(path)


def test_rng_state_round_trip():
    gen = np.random.default_rng(1234)
    gen.standard_normal(17)  # advance
    words = encode_rng(gen)
    clone = decode_rng(words)
    assert np.array_equal(clone.standard_normal(32), gen.standard_normal(32))


def test_rng_words_reject_bad_length():
    with pytest.raises(CheckpointError):
        decode_rng(np.zeros(9))
