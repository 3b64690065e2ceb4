"""Checkpoint container: bit-exact round-trips and corruption handling."""

import numpy as np
import pytest

from softbeam.checkpoint import (clone_params, load_checkpoint,
                                 save_checkpoint, with_mode)
from softbeam.errors import DataError

from conftest import make_params


@pytest.mark.parametrize("encoder_mode", ["unidirectional", "bidirectional"])
@pytest.mark.parametrize("attention_mode", ["fixed", "content"])
def test_round_trip_is_bit_exact(tmp_path, encoder_mode, attention_mode):
    p = make_params(encoder_mode=encoder_mode, attention_mode=attention_mode,
                    seed=42)
    path = tmp_path / "model.bin"
    save_checkpoint(p, path)
    q = load_checkpoint(path)
    assert q.config == p.config
    for (name_p, tp), (name_q, tq) in zip(p.items(), q.items()):
        assert name_p == name_q
        assert np.array_equal(tp.values, tq.values), name_p


def test_double_round_trip_identical_bytes(tmp_path):
    p = make_params(seed=7)
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    save_checkpoint(p, a)
    save_checkpoint(load_checkpoint(a), b)
    assert a.read_bytes() == b.read_bytes()


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(DataError, match="magic"):
        load_checkpoint(path)


def test_truncated_file_rejected(tmp_path):
    p = make_params()
    path = tmp_path / "model.bin"
    save_checkpoint(p, path)
    data = path.read_bytes()
    path.write_bytes(data[: len(data) // 2])
    with pytest.raises(DataError, match="truncated"):
        load_checkpoint(path)


def test_trailing_bytes_rejected(tmp_path):
    p = make_params()
    path = tmp_path / "model.bin"
    save_checkpoint(p, path)
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(DataError, match="trailing"):
        load_checkpoint(path)


def test_unsupported_version_rejected(tmp_path):
    p = make_params()
    path = tmp_path / "model.bin"
    save_checkpoint(p, path)
    data = bytearray(path.read_bytes())
    data[4] = 99
    path.write_bytes(bytes(data))
    with pytest.raises(DataError, match="version"):
        load_checkpoint(path)


def test_clone_params_is_independent():
    p = make_params(seed=3)
    q = clone_params(p)
    assert np.array_equal(p.out_w.values, q.out_w.values)
    q.out_w.values[0, 0] += 1.0
    assert p.out_w.values[0, 0] != q.out_w.values[0, 0]


def test_with_mode_shares_tensors_changes_flag():
    p = make_params(normalization_mode="local")
    g = with_mode(p, "global")
    assert g.config.normalization_mode == "global"
    assert g.out_w is p.out_w
    assert p.config.normalization_mode == "local"
