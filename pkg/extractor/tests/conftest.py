import struct

import numpy as np
import pytest
from PIL import Image


def parse_crowt(raw: bytes):
    """Independent .crowt parser: header fields, (K, W, H) float array, flags."""
    magic, version, dtype, _, k, w, h = struct.unpack("<4sBBHIII", raw[:20])
    assert magic == b"CRWT" and version == 1 and dtype == 1
    count = k * w * h
    values = np.frombuffer(raw[20:20 + 4 * count], dtype="<f4").reshape(k, w, h)
    assert len(raw) == 20 + 4 * count + 1
    return values.astype(np.float64), raw[-1]


@pytest.fixture(scope="session")
def img_dir(tmp_path_factory):
    """Three deterministic images: a gradient, a noise image, and a black one."""
    d = tmp_path_factory.mktemp("images")
    w, h = 96, 64
    x = np.arange(w, dtype=np.uint8)
    gradient = np.broadcast_to(x, (h, w))
    rgb = np.stack([gradient, gradient[:, ::-1], np.full((h, w), 77, np.uint8)], axis=-1)
    Image.fromarray(rgb, "RGB").save(d / "gradient.png")
    rng = np.random.default_rng(11)
    Image.fromarray(rng.integers(0, 255, (32, 64, 3), dtype=np.uint8), "RGB").save(d / "noise.png")
    Image.new("RGB", (64, 64), (0, 0, 0)).save(d / "black.png")
    return d


@pytest.fixture(scope="session")
def pool5_run(img_dir, tmp_path_factory):
    """One shared pool5 extraction over the session corpus (random weights)."""
    from crow_extract import ExtractionJob, extract

    out = tmp_path_factory.mktemp("pool5_out")
    written = extract(ExtractionJob(images=img_dir, out_dir=out, layer="pool5", weights="random"))
    return out, dict(written)
