"""Round-trip and corruption tests for the binary matrix container."""

import numpy as np
import pytest

from fdtlab.errors import DataError
from fdtlab.matrixio import read_matrices, write_matrices


def test_round_trip_preserves_names_shapes_values(tmp_path):
    rng = np.random.default_rng(21)
    mats = {
        "feats": rng.normal(size=(17, 16)).astype(np.float32),
        "logp": rng.normal(size=(3, 9)).astype(np.float32),
        "one": np.ones((1, 1), dtype=np.float32),
    }
    path = tmp_path / "m.bin"
    write_matrices(path, mats)
    back = read_matrices(path)
    assert list(back) == ["feats", "logp", "one"]
    for name in mats:
        assert back[name].dtype == np.float32
        assert np.array_equal(back[name], mats[name])


def test_float64_input_is_cast_to_float32(tmp_path):
    x = np.array([[1.0, 2.0 + 1e-12]])
    path = tmp_path / "m.bin"
    write_matrices(path, {"x": x})
    back = read_matrices(path)["x"]
    assert back.dtype == np.float32
    assert np.array_equal(back, x.astype(np.float32))


def test_empty_container_round_trips(tmp_path):
    path = tmp_path / "empty.bin"
    write_matrices(path, {})
    assert read_matrices(path) == {}


def test_rejects_non_2d(tmp_path):
    with pytest.raises(DataError):
        write_matrices(tmp_path / "bad.bin", {"v": np.zeros(3)})


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(DataError):
        read_matrices(path)


def test_truncation_rejected(tmp_path):
    path = tmp_path / "m.bin"
    write_matrices(path, {"x": np.ones((4, 4), dtype=np.float32)})
    blob = path.read_bytes()
    for cut in (6, len(blob) // 2, len(blob) - 1):
        path.write_bytes(blob[:cut])
        with pytest.raises(DataError):
            read_matrices(path)


def test_trailing_garbage_rejected(tmp_path):
    path = tmp_path / "m.bin"
    write_matrices(path, {"x": np.ones((2, 2), dtype=np.float32)})
    path.write_bytes(path.read_bytes() + b"extra")
    with pytest.raises(DataError):
        read_matrices(path)
