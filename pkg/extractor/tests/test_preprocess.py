import numpy as np
import pytest
from PIL import Image

from crow_extract import (
    CAFFE_BGR_MEAN,
    TORCHVISION_MEAN,
    TORCHVISION_STD,
    ExtractionError,
    crop_query,
    load_image,
    to_input,
)


def solid(w, h, rgb):
    return Image.new("RGB", (w, h), rgb)


def gradient_image(w=48, h=40):
    """Pixel value encodes its x coordinate; green channel encodes y."""
    x = np.broadcast_to(np.arange(w, dtype=np.uint8), (h, w))
    y = np.broadcast_to(np.arange(h, dtype=np.uint8)[:, None], (h, w))
    return Image.fromarray(np.stack([x, y, np.zeros_like(x)], axis=-1), "RGB")


def test_caffe_mode_flips_to_bgr_and_subtracts_mean():
    t = to_input(solid(32, 32, (10, 20, 30)), "caffe")
    assert t.shape == (1, 3, 32, 32)
    assert t.dtype.__str__() == "torch.float32"
    got = t[0, :, 0, 0].numpy()
    # channel order BGR, raw 0..255 scale, mean pixel removed
    expect = np.array([30, 20, 10], dtype=np.float32) - np.array(CAFFE_BGR_MEAN, dtype=np.float32)
    np.testing.assert_allclose(got, expect, rtol=1e-6)


def test_caffe_mode_custom_mean():
    t = to_input(solid(32, 32, (0, 0, 0)), "caffe", mean=(1.0, 2.0, 3.0))
    np.testing.assert_allclose(t[0, :, 5, 5].numpy(), [-1.0, -2.0, -3.0], rtol=1e-6)


def test_torchvision_mode_scales_and_normalizes():
    t = to_input(solid(32, 32, (255, 0, 0)), "torchvision")
    got = t[0, :, 0, 0].numpy()
    expect = (np.array([1.0, 0.0, 0.0]) - np.array(TORCHVISION_MEAN)) / np.array(TORCHVISION_STD)
    np.testing.assert_allclose(got, expect.astype(np.float32), rtol=1e-5)


def test_input_keeps_size_and_orientation():
    t = to_input(gradient_image(48, 40), "caffe")
    assert t.shape == (1, 3, 40, 48)
    # caffe mode flips channels, so channel 2 is the red plane = x coordinate
    row = t[0, 2, 7, :].numpy() + CAFFE_BGR_MEAN[2]
    np.testing.assert_allclose(row, np.arange(48), atol=1e-4)
    col = t[0, 1, :, 9].numpy() + CAFFE_BGR_MEAN[1]
    np.testing.assert_allclose(col, np.arange(40), atol=1e-4)


def test_too_small_image_rejected():
    with pytest.raises(ExtractionError, match="at least 32"):
        to_input(solid(16, 48, (0, 0, 0)))


def test_unknown_preproc_mode():
    with pytest.raises(ExtractionError, match="unknown preprocessing mode"):
        to_input(solid(32, 32, (0, 0, 0)), "caffe2")


def test_crop_full_image_is_identity():
    img = gradient_image()
    out = crop_query(img, (0, 0, img.size[0], img.size[1]))
    assert np.array_equal(np.asarray(out), np.asarray(img))


def test_crop_snaps_outward_to_whole_pixels():
    img = gradient_image()
    out = crop_query(img, (10.4, 5.2, 20.6, 15.9))
    # floor the near corner, ceil the far one: pixels [10, 21) x [5, 16)
    assert out.size == (11, 11)
    assert np.array_equal(np.asarray(out), np.asarray(img)[5:16, 10:21])


def test_crop_integer_box_is_exact():
    img = gradient_image()
    out = crop_query(img, (8, 4, 20, 24))
    assert out.size == (12, 20)
    assert np.array_equal(np.asarray(out), np.asarray(img)[4:24, 8:20])


@pytest.mark.parametrize("bbox", [
    (-1, 0, 10, 10),
    (0, -0.5, 10, 10),
    (0, 0, 49, 10),    # right edge past a 48-wide image
    (0, 0, 10, 41),
])
def test_crop_outside_image_is_hard_error(bbox):
    with pytest.raises(ExtractionError, match="outside"):
        crop_query(gradient_image(), bbox)


@pytest.mark.parametrize("bbox", [(10, 10, 10, 20), (10, 10, 30, 10), (20, 5, 10, 15)])
def test_crop_empty_box_is_hard_error(bbox):
    with pytest.raises(ExtractionError, match="no pixels"):
        crop_query(gradient_image(), bbox)


def test_load_image_rejects_undecodable(tmp_path):
    bad = tmp_path / "not_an_image.jpg"
    bad.write_bytes(b"this is just text pretending")
    with pytest.raises(OSError):
        load_image(bad)


def test_load_image_converts_to_rgb(tmp_path):
    p = tmp_path / "gray.png"
    Image.new("L", (40, 40), 128).save(p)
    img = load_image(p)
    assert img.mode == "RGB" and img.size == (40, 40)
