import numpy as np
import pytest

from dialctl.nn import (
    CheckpointError,
    forward_sequence,
    init_model,
    load_checkpoint,
    save_checkpoint,
)


def test_round_trip_bitwise_exact(tmp_path):
    params = init_model("lstm", 11, 7, 5, seed=123)
    path = tmp_path / "model.ckpt"
    save_checkpoint(params, path)
    loaded = load_checkpoint(path)
    assert loaded.kind == "lstm"
    assert (loaded.input_dim, loaded.hidden, loaded.n_actions) == (11, 7, 5)
    assert set(loaded.tensors) == set(params.tensors)
    for name, arr in params.tensors.items():
        assert arr.tobytes() == loaded.tensors[name].tobytes()


def test_save_is_deterministic(tmp_path):
    params = init_model("rnn", 4, 3, 2, seed=9)
    a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(params, a)
    save_checkpoint(params, b)
    assert a.read_bytes() == b.read_bytes()


def test_round_trip_preserves_behavior(tmp_path):
    params = init_model("lstm", 6, 4, 3, seed=3)
    path = tmp_path / "m.ckpt"
    save_checkpoint(params, path)
    loaded = load_checkpoint(path)
    xs = np.random.default_rng(0).normal(size=(5, 6))
    assert np.array_equal(forward_sequence(params, xs), forward_sequence(loaded, xs))


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.ckpt"
    path.write_bytes(b"NOTAMODEL" + b"\x00" * 64)
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_truncated_rejected(tmp_path):
    params = init_model("dnn", 4, 3, 2, seed=1)
    path = tmp_path / "m.ckpt"
    save_checkpoint(params, path)
    path.write_bytes(path.read_bytes()[:-9])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_non_finite_rejected(tmp_path):
    params = init_model("dnn", 2, 2, 2, seed=1)
    params.tensors["w_x"][0, 0] = np.inf
    path = tmp_path / "m.ckpt"
    save_checkpoint(params, path)
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
