"""Tensor model, .crowt format, and local pooling."""

import io
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from crow import FeatureTensor, PoolingSpec, local_pool, read_tensor, tensor_bytes, write_tensor
from crow.errors import DataError, DimensionError, FormatError, ParameterError, TruncationError
from crow.tensor import HEADER, MAGIC, iter_corpus, read_manifest, write_manifest


def make_file(k, w, h, floats, flags=1, magic=b"CRWT", version=1, dtype=1):
    body = HEADER.pack(magic, version, dtype, 0, k, w, h)
    body += struct.pack(f"<{len(floats)}f", *floats)
    return body + bytes([flags])


# -- construction --------------------------------------------------------


def test_tensor_basic_properties():
    t = FeatureTensor(np.arange(24.0).reshape(2, 3, 4), id="img")
    assert t.shape == (2, 3, 4)
    assert (t.channels, t.width, t.height) == (2, 3, 4)
    assert t.id == "img"
    assert t.nonneg
    assert not FeatureTensor(np.array([[[-1.0]]])).nonneg


def test_tensor_is_immutable():
    t = FeatureTensor(np.zeros((1, 2, 2)))
    with pytest.raises(ValueError):
        t.data[0, 0, 0] = 1.0


def test_tensor_rejects_bad_shapes_and_values():
    with pytest.raises(DimensionError):
        FeatureTensor(np.zeros((2, 2)))
    with pytest.raises(DimensionError):
        FeatureTensor(np.zeros((0, 2, 2)))
    with pytest.raises(DataError):
        FeatureTensor(np.array([[[np.nan]]]))
    with pytest.raises(DataError):
        FeatureTensor(np.array([[[np.inf]]]))


def test_pooling_spec_validation():
    with pytest.raises(ParameterError):
        PoolingSpec(kind="avg")
    with pytest.raises(ParameterError):
        PoolingSpec(2, 2, 0, "max")
    assert PoolingSpec.none().kind == "none"
    assert PoolingSpec.max2x2() == PoolingSpec(2, 2, 2, "max")


# -- .crowt reading ------------------------------------------------------


def test_read_smallest_wellformed_file():
    # K=2, W=1, H=1 payload [1.0, 2.0]
    t = read_tensor(make_file(2, 1, 1, [1.0, 2.0]))
    assert t.shape == (2, 1, 1)
    assert t.data[0, 0, 0] == 1.0
    assert t.data[1, 0, 0] == 2.0


def test_minimal_file_is_25_bytes():
    b = tensor_bytes(FeatureTensor(np.zeros((1, 1, 1))))
    assert len(b) == 25  # 20-byte header + one f32 + flags byte
    assert read_tensor(b).data[0, 0, 0] == 0.0


def test_truncated_payload():
    # header says 2x2x2 = 8 floats, only 7 present
    body = HEADER.pack(MAGIC, 1, 1, 0, 2, 2, 2) + struct.pack("<7f", *range(7))
    with pytest.raises(TruncationError):
        read_tensor(body)


def test_missing_flags_byte():
    body = HEADER.pack(MAGIC, 1, 1, 0, 1, 1, 1) + struct.pack("<f", 1.0)
    with pytest.raises(TruncationError):
        read_tensor(body)


def test_bad_magic_version_dtype():
    with pytest.raises(FormatError):
        read_tensor(make_file(1, 1, 1, [0.0], magic=b"XXXX"))
    with pytest.raises(FormatError):
        read_tensor(make_file(1, 1, 1, [0.0], version=9))
    with pytest.raises(FormatError):
        read_tensor(make_file(1, 1, 1, [0.0], dtype=7))


def test_zero_dim_header_rejected():
    with pytest.raises(FormatError):
        read_tensor(make_file(0, 1, 1, []))


def test_nan_payload_rejected():
    with pytest.raises(DataError):
        read_tensor(make_file(1, 1, 1, [float("nan")]))


def test_max_elements_guard():
    b = make_file(2, 2, 2, [0.0] * 8)
    with pytest.raises(DataError):
        read_tensor(b, max_elements=7)
    read_tensor(b, max_elements=8)  # exactly at the guard is fine


def test_flags_byte_is_recomputed_not_trusted():
    # negative activation but flags byte claims nonneg
    t = read_tensor(make_file(1, 1, 1, [-3.0], flags=1))
    assert not t.nonneg
    # and the other way round
    t = read_tensor(make_file(1, 1, 1, [3.0], flags=0))
    assert t.nonneg


def test_trailing_bytes_rejected_for_paths(tmp_path):
    p = tmp_path / "x.crowt"
    p.write_bytes(make_file(1, 1, 1, [1.0]) + b"junk")
    with pytest.raises(FormatError):
        read_tensor(p)


def test_stream_reading_stops_at_flags_byte():
    buf = io.BytesIO(make_file(1, 1, 1, [1.0]) + make_file(1, 1, 1, [2.0]))
    a = read_tensor(buf)
    b = read_tensor(buf)
    assert a.data[0, 0, 0] == 1.0 and b.data[0, 0, 0] == 2.0
    assert buf.read() == b""


# -- .crowt writing / round-trip -----------------------------------------


def test_round_trip_64x13x17_byte_identical():
    rng = np.random.default_rng(0)
    t = FeatureTensor(rng.random((64, 13, 17)).astype(np.float32), id="rt")
    first = tensor_bytes(t)
    second = tensor_bytes(read_tensor(first, id="rt"))
    assert first == second
    assert len(first) == 20 + 4 * 64 * 13 * 17 + 1


def test_single_activation_change_touches_4_bytes():
    rng = np.random.default_rng(1)
    base = rng.random((3, 4, 5)).astype(np.float32)
    other = base.copy()
    other[1, 2, 3] += 1.0
    a = tensor_bytes(FeatureTensor(base))
    b = tensor_bytes(FeatureTensor(other))
    assert len(a) == len(b)
    diff = [n for n in range(len(a)) if a[n] != b[n]]
    # only the 4-byte slot of the changed float at flat offset (1,2,3) moves
    flat = 1 * 4 * 5 + 2 * 5 + 3
    assert diff and set(diff) <= set(range(20 + 4 * flat, 20 + 4 * flat + 4))


def test_write_read_path(tmp_path):
    t = FeatureTensor(np.ones((2, 2, 2), dtype=np.float32), id="whatever")
    p = tmp_path / "named.crowt"
    write_tensor(t, p)
    back = read_tensor(p)
    assert back.id == "named"  # stem wins when no id is given
    np.testing.assert_array_equal(back.data, t.data)


def test_float32_overflow_rejected_on_write():
    t = FeatureTensor(np.array([[[1e300]]]))
    with pytest.raises(DataError):
        tensor_bytes(t)


# -- pooling -------------------------------------------------------------


def test_pool_none_is_identity():
    t = FeatureTensor(np.random.default_rng(2).random((3, 5, 5)))
    assert local_pool(t, PoolingSpec.none()) is t


def test_pool_max_2x2_single_window():
    t = FeatureTensor(np.array([[[1.0, 3.0], [2.0, 4.0]]]))
    out = local_pool(t, PoolingSpec(2, 2, 1, "max"))
    assert out.shape == (1, 1, 1)
    assert out.data[0, 0, 0] == 4.0


def test_pool_output_dims_floor():
    t = FeatureTensor(np.zeros((1, 7, 5)))
    out = local_pool(t, PoolingSpec(2, 2, 2, "max"))
    assert out.shape == (1, 3, 2)  # floor((7-2)/2)+1, floor((5-2)/2)+1


def test_pool_window_too_large():
    t = FeatureTensor(np.zeros((1, 2, 2)))
    with pytest.raises(DimensionError):
        local_pool(t, PoolingSpec(3, 3, 1, "max"))


def test_sum_pool_matches_loop_oracle():
    rng = np.random.default_rng(3)
    data = rng.random((3, 6, 6))
    out = local_pool(FeatureTensor(data), PoolingSpec(2, 2, 2, "sum"))
    expect = oracles.pool_oracle(data, 2, 2, 2, "sum")
    np.testing.assert_allclose(out.data, expect, rtol=1e-12)


def test_max_pool_matches_loop_oracle_odd_stride():
    rng = np.random.default_rng(4)
    data = rng.random((2, 9, 7))
    out = local_pool(FeatureTensor(data), PoolingSpec(3, 2, 2, "max"))
    expect = oracles.pool_oracle(data, 3, 2, 2, "max")
    np.testing.assert_array_equal(out.data, expect)


def test_full_extent_max_is_per_channel_maxima():
    rng = np.random.default_rng(5)
    data = rng.random((4, 5, 6))
    out = local_pool(FeatureTensor(data), PoolingSpec(5, 6, 1, "max"))
    assert out.shape == (4, 1, 1)
    np.testing.assert_array_equal(out.data[:, 0, 0], data.max(axis=(1, 2)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["max", "sum"]))
def test_pool_commutes_with_channel_permutation(seed, kind):
    rng = np.random.default_rng(seed)
    data = rng.random((5, 6, 4))
    perm = rng.permutation(5)
    spec = PoolingSpec(2, 2, 2, kind)
    pooled_then_permuted = local_pool(FeatureTensor(data), spec).data[perm]
    permuted_then_pooled = local_pool(FeatureTensor(data[perm]), spec).data
    np.testing.assert_array_equal(pooled_then_permuted, permuted_then_pooled)


def test_max_pool_values_come_from_input():
    rng = np.random.default_rng(6)
    data = rng.random((2, 6, 6))
    out = local_pool(FeatureTensor(data), PoolingSpec(3, 3, 3, "max"))
    assert set(out.data.ravel()) <= set(data.ravel())


# -- manifests and corpus iteration --------------------------------------


def test_manifest_round_trip(tmp_path):
    entries = [("a", "ta.crowt"), ("b", "sub/tb.crowt")]
    p = tmp_path / "manifest.tsv"
    write_manifest(entries, p)
    assert read_manifest(p) == entries


def test_manifest_duplicate_id(tmp_path):
    p = tmp_path / "manifest.tsv"
    p.write_text("a\tone.crowt\na\ttwo.crowt\n")
    with pytest.raises(FormatError):
        read_manifest(p)


def test_manifest_malformed_line(tmp_path):
    p = tmp_path / "manifest.tsv"
    p.write_text("no-tab-here\n")
    with pytest.raises(FormatError):
        read_manifest(p)


def test_iter_corpus_with_manifest(tmp_path):
    for n in range(3):
        write_tensor(FeatureTensor(np.full((1, 1, 1), float(n))), tmp_path / f"t{n}.crowt")
    write_manifest([("zz", "t2.crowt"), ("aa", "t0.crowt")], tmp_path / "manifest.tsv")
    got = list(iter_corpus(tmp_path))
    assert [t.id for t in got] == ["zz", "aa"]  # manifest order, manifest ids
    assert [t.data[0, 0, 0] for t in got] == [2.0, 0.0]


def test_iter_corpus_without_manifest_sorted_stems(tmp_path):
    for name, v in [("b", 1.0), ("a", 2.0)]:
        write_tensor(FeatureTensor(np.full((1, 1, 1), v)), tmp_path / f"{name}.crowt")
    got = list(iter_corpus(tmp_path))
    assert [t.id for t in got] == ["a", "b"]
