import struct

import numpy as np
import pytest

from crow_extract import crowt_bytes, write_crowt


def test_layout_field_by_field():
    data = np.arange(12, dtype=float).reshape(2, 3, 2)
    raw = crowt_bytes(data)
    assert len(raw) == 20 + 4 * 12 + 1
    assert struct.unpack("<4sBBHIII", raw[:20]) == (b"CRWT", 1, 1, 0, 2, 3, 2)
    payload = np.frombuffer(raw[20:-1], dtype="<f4")
    np.testing.assert_array_equal(payload, np.arange(12, dtype="<f4"))
    assert raw[-1] == 1


def test_flags_clear_for_negative_values():
    data = np.ones((1, 2, 2))
    data_neg = data.copy()
    data_neg[0, 1, 1] = -0.5
    assert crowt_bytes(data)[-1] == 1
    assert crowt_bytes(data_neg)[-1] == 0


def test_rejects_bad_shapes_and_values():
    with pytest.raises(ValueError, match="channels, width, height"):
        crowt_bytes(np.zeros((3, 3)))
    bad = np.zeros((1, 2, 2))
    bad[0, 0, 0] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        crowt_bytes(bad)


def test_write_is_atomic_and_replayable(tmp_path):
    data = np.random.default_rng(5).random((4, 5, 6))
    p = tmp_path / "t.crowt"
    write_crowt(data, p)
    first = p.read_bytes()
    write_crowt(data, p)  # overwrite in place via rename
    assert p.read_bytes() == first
    assert list(tmp_path.iterdir()) == [p]
