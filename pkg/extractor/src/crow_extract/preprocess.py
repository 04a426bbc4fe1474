"""Image loading, query cropping, and network input preparation.

Two preprocessing conventions are supported, and the right one depends on
where the network weights came from:

``caffe``
    Channels flipped to BGR, pixel values kept in 0..255, the per-channel
    mean pixel subtracted.  This is the convention of the original VGG16
    release; use it with weights converted from that model.

``torchvision``
    RGB, scaled to 0..1, normalized with the ImageNet mean/std.  Use it
    with torchvision's own pretrained VGG16 weights.

Images are never resized: the network is fully convolutional up to the
layers tapped here, so each image keeps its native resolution and aspect
ratio.
"""

import math
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .errors import ExtractionError

# Mean pixel of the original VGG16 training set, in BGR order.
CAFFE_BGR_MEAN = (103.939, 116.779, 123.68)
TORCHVISION_MEAN = (0.485, 0.456, 0.406)
TORCHVISION_STD = (0.229, 0.224, 0.225)

# Five stride-2 poolings: anything smaller collapses to nothing.
MIN_SIDE = 32

PREPROC_MODES = ("caffe", "torchvision")


def load_image(path) -> Image.Image:
    """Decode an image as RGB.  Raises OSError-family on undecodable files."""
    with Image.open(path) as img:
        return img.convert("RGB")


def crop_query(img: Image.Image, bbox) -> Image.Image:
    """Crop a ground-truth box (x1, y1, x2, y2 in pixels, possibly fractional).

    The box is snapped outward to whole pixels (floor the top-left corner,
    ceil the bottom-right) so the cropped region always covers the
    annotated one.  A box that leaves the image, or encloses no pixels,
    is a hard error: it means the ground truth and the image disagree.
    """
    x1, y1, x2, y2 = (float(v) for v in bbox)
    left, top = math.floor(x1), math.floor(y1)
    right, bottom = math.ceil(x2), math.ceil(y2)
    w, h = img.size
    if left < 0 or top < 0 or right > w or bottom > h:
        raise ExtractionError(
            f"query bbox ({x1}, {y1}, {x2}, {y2}) falls outside the {w}x{h} image"
        )
    if right <= left or bottom <= top:
        raise ExtractionError(f"query bbox ({x1}, {y1}, {x2}, {y2}) encloses no pixels")
    return img.crop((left, top, right, bottom))


def to_input(img: Image.Image, mode: str = "caffe", mean=CAFFE_BGR_MEAN) -> torch.Tensor:
    """Turn a PIL image into a (1, 3, H, W) float32 network input."""
    if mode not in PREPROC_MODES:
        raise ExtractionError(f"unknown preprocessing mode {mode!r} (expected one of {PREPROC_MODES})")
    w, h = img.size
    if w < MIN_SIDE or h < MIN_SIDE:
        raise ExtractionError(f"image is {w}x{h}; the network needs at least {MIN_SIDE} pixels per side")
    a = np.asarray(img, dtype=np.float32)  # (H, W, 3), RGB, 0..255
    if mode == "caffe":
        a = a[:, :, ::-1] - np.asarray(mean, dtype=np.float32)
    else:
        a = a / 255.0
        a = (a - np.asarray(TORCHVISION_MEAN, dtype=np.float32)) / np.asarray(
            TORCHVISION_STD, dtype=np.float32
        )
    chw = np.ascontiguousarray(a.transpose(2, 0, 1))
    return torch.from_numpy(chw).unsqueeze(0)


def is_image_file(path) -> bool:
    return Path(path).suffix.lower() in (".jpg", ".jpeg", ".png", ".bmp", ".ppm", ".tif", ".tiff")
