"""Feature-tensor data model, the ``.crowt`` interchange format and local pooling.

A feature tensor is the dense block of activations of one convolutional layer
for one image: ``K`` channels over a ``W x H`` spatial grid, laid out
channel-major (entry ``(k, i, j)`` sits at flat index ``k*W*H + i*H + j``).

``.crowt`` layout (all integers little-endian):

    offset  size  field
    0       4     magic  b"CRWT"
    4       1     version, currently 1
    5       1     dtype code, 1 = float32 little-endian
    6       2     reserved, written as zero
    8       4     K  (u32)
    12      4     W  (u32)
    16      4     H  (u32)
    20      4*KWH activations, float32 LE, channel-major
    ...     1     flags byte; bit 0 set = "all activations non-negative"

A corpus directory is described by a sidecar manifest: one UTF-8 line per
tensor, ``<image-id>\\t<relative-path>``.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator

import numpy as np

from .errors import DataError, DimensionError, FormatError, ParameterError, TruncationError

MAGIC = b"CRWT"
VERSION = 1
DTYPE_F32LE = 1
HEADER = struct.Struct("<4sBBHIII")  # magic, version, dtype, reserved, K, W, H
FLAG_NONNEG = 0x01

#: Safety guard on K*W*H; the format itself allows larger tensors.
DEFAULT_MAX_ELEMENTS = 2**28


@dataclass(frozen=True)
class FeatureTensor:
    """Immutable 3-d activation block for one image.

    ``data`` is held as a read-only float64 array of shape (K, W, H); the
    on-disk representation is float32. ``nonneg`` records whether every
    activation is >= 0 (true for ReLU-derived layers such as pool5), which
    spatial weighting requires.
    """

    data: np.ndarray
    id: str = ""

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        if arr.ndim != 3:
            raise DimensionError(f"tensor data must be 3-d (K, W, H), got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise DimensionError(f"tensor dims must be positive, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise DataError(f"tensor {self.id!r} contains NaN or Inf activations")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def nonneg(self) -> bool:
        return bool((self.data >= 0.0).all())

    def with_id(self, new_id: str) -> "FeatureTensor":
        t = FeatureTensor.__new__(FeatureTensor)
        object.__setattr__(t, "data", self.data)
        object.__setattr__(t, "id", new_id)
        return t


@dataclass(frozen=True)
class PoolingSpec:
    """Spatially-local pooling step: window ``window_w x window_h``, stride, kind.

    ``kind="none"`` means no pooling (equivalently a 1x1 window with stride 1).
    """

    window_w: int = 1
    window_h: int = 1
    stride: int = 1
    kind: str = "none"  # "max" | "sum" | "none"

    def __post_init__(self) -> None:
        if self.kind not in ("max", "sum", "none"):
            raise ParameterError(f"unknown pooling kind {self.kind!r}")
        if self.window_w < 1 or self.window_h < 1 or self.stride < 1:
            raise ParameterError("pooling window and stride must be positive")

    @classmethod
    def none(cls) -> "PoolingSpec":
        return cls()

    @classmethod
    def max2x2(cls) -> "PoolingSpec":
        return cls(2, 2, 2, "max")


def local_pool(t: FeatureTensor, spec: PoolingSpec) -> FeatureTensor:
    """Max- or sum-pool each channel over a local window.

    Output spatial dims are floor((W-w)/s)+1 x floor((H-h)/s)+1; windows that
    would overhang the right/bottom edge are dropped. ``kind="none"`` returns
    the input unchanged.
    """
    if spec.kind == "none":
        return t
    K, W, H = t.shape
    if spec.window_w > W or spec.window_h > H:
        raise DimensionError(
            f"pooling window {spec.window_w}x{spec.window_h} exceeds spatial dims {W}x{H}"
        )
    windows = np.lib.stride_tricks.sliding_window_view(
        t.data, (spec.window_w, spec.window_h), axis=(1, 2)
    )[:, :: spec.stride, :: spec.stride]
    if spec.kind == "max":
        out = windows.max(axis=(3, 4))
    else:
        out = windows.sum(axis=(3, 4), dtype=np.float64)
    return FeatureTensor(out, id=t.id)


# ---------------------------------------------------------------------------
# .crowt serialization


def _read_exact(stream: BinaryIO, n: int, what: str) -> bytes:
    buf = stream.read(n)
    if len(buf) != n:
        raise TruncationError(f"stream ended while reading {what}: wanted {n} bytes, got {len(buf)}")
    return buf


def read_tensor(source: BinaryIO | bytes | str | Path, max_elements: int = DEFAULT_MAX_ELEMENTS, id: str = "") -> FeatureTensor:
    """Read one tensor from a ``.crowt`` stream, path or bytes.

    Paths are read strictly (trailing bytes are an error); with a stream the
    position is left just past the flags byte so streams can be concatenated.
    """
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            t = read_tensor(fh, max_elements=max_elements, id=id or Path(source).stem)
            if fh.read(1):
                raise FormatError(f"{source}: trailing bytes after tensor payload")
            return t
    if isinstance(source, (bytes, bytearray)):
        return read_tensor(io.BytesIO(source), max_elements=max_elements, id=id)

    raw = _read_exact(source, HEADER.size, "header")
    magic, version, dtype, _reserved, k, w, h = HEADER.unpack(raw)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    if dtype != DTYPE_F32LE:
        raise FormatError(f"unsupported dtype code {dtype}")
    if min(k, w, h) < 1:
        raise FormatError(f"declared dims must be positive, got K={k} W={w} H={h}")
    n = k * w * h
    if n > max_elements:
        raise DataError(f"tensor of {n} elements exceeds the {max_elements}-element guard")
    payload = _read_exact(source, 4 * n, f"{n} float32 activations")
    _read_exact(source, 1, "flags byte")  # nonneg is recomputed from the data
    values = np.frombuffer(payload, dtype="<f4", count=n).astype(np.float64)
    if not np.isfinite(values).all():
        raise DataError("payload contains NaN or Inf activations")
    return FeatureTensor(values.reshape(k, w, h), id=id)


def write_tensor(t: FeatureTensor, sink: BinaryIO | str | Path) -> None:
    """Write ``t`` in the ``.crowt`` format; ``read_tensor`` inverts this bit-exactly."""
    if isinstance(sink, (str, Path)):
        with open(sink, "wb") as fh:
            write_tensor(t, fh)
        return
    with np.errstate(over="ignore"):
        values = t.data.astype("<f4")
    if not np.isfinite(values).all():
        raise DataError("activations overflow float32")
    flags = FLAG_NONNEG if t.nonneg else 0
    sink.write(HEADER.pack(MAGIC, VERSION, DTYPE_F32LE, 0, *t.shape))
    sink.write(values.tobytes(order="C"))
    sink.write(bytes([flags]))


def tensor_bytes(t: FeatureTensor) -> bytes:
    buf = io.BytesIO()
    write_tensor(t, buf)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# corpus manifests

MANIFEST_NAME = "manifest.tsv"


def write_manifest(entries: Iterable[tuple[str, str]], path: str | Path) -> None:
    """Write ``<image-id>\\t<relative-path>`` lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for image_id, rel in entries:
            fh.write(f"{image_id}\t{rel}\n")


def read_manifest(path: str | Path) -> list[tuple[str, str]]:
    entries: list[tuple[str, str]] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError(f"{path}:{lineno}: expected '<id>\\t<path>', got {line!r}")
            image_id, rel = parts
            if image_id in seen:
                raise FormatError(f"{path}:{lineno}: duplicate image id {image_id!r}")
            seen.add(image_id)
            entries.append((image_id, rel))
    return entries


def iter_corpus(directory: str | Path, max_elements: int = DEFAULT_MAX_ELEMENTS) -> Iterator[FeatureTensor]:
    """Yield tensors from a corpus directory.

    Uses ``manifest.tsv`` when present (ids taken from the manifest),
    otherwise every ``*.crowt`` file in sorted order with the file stem as id.
    """
    directory = Path(directory)
    manifest = directory / MANIFEST_NAME
    if manifest.exists():
        for image_id, rel in read_manifest(manifest):
            yield read_tensor(directory / rel, max_elements=max_elements, id=image_id)
    else:
        for path in sorted(directory.glob("*.crowt")):
            yield read_tensor(path, max_elements=max_elements)
