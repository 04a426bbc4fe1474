"""Minimal .crowt writer.

Deliberately self-contained: the extractor talks to the aggregation side
only through files, so the format is implemented here from its byte layout
rather than imported.  Layout: 20-byte little-endian header (magic "CRWT",
version, dtype, reserved, K, W, H), float32 payload in channel-major
order with the width axis before the height axis, one trailing flags byte
(bit 0 = every value non-negative).
"""

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

HEADER = struct.Struct("<4sBBHIII")
MAGIC = b"CRWT"
VERSION = 1
DTYPE_F32 = 1


def crowt_bytes(data: np.ndarray) -> bytes:
    """Serialize a (K, W, H) float array."""
    a = np.ascontiguousarray(data, dtype="<f4")
    if a.ndim != 3:
        raise ValueError(f"expected a (channels, width, height) array, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("activations contain non-finite values")
    k, w, h = a.shape
    flags = 1 if (a >= 0).all() else 0
    return HEADER.pack(MAGIC, VERSION, DTYPE_F32, 0, k, w, h) + a.tobytes() + bytes([flags])


def write_crowt(data: np.ndarray, path) -> None:
    """Write atomically: temp file in the target directory, then rename."""
    path = Path(path)
    payload = crowt_bytes(data)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_manifest(entries, path) -> None:
    """Write ``<id>\\t<relative-path>`` lines (the corpus walking order)."""
    with open(path, "w", encoding="utf-8") as f:
        for image_id, rel in entries:
            f.write(f"{image_id}\t{rel}\n")
