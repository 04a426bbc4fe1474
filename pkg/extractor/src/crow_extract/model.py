"""VGG16 trunk construction and layer tapping.

The two tap points are the ones useful for sum-style aggregation:

``conv5_3``  the last conv layer's post-ReLU activations (stride 16)
``pool5``    the final 2x2/2 max pooling of conv5_3 (stride 32)

Both are non-negative by construction (post-ReLU), and max-pooling a
conv5_3 tensor with a 2x2 stride-2 window reproduces pool5 exactly.
"""

import logging
from pathlib import Path

import torch
from torchvision import models

from .errors import ExtractionError

logger = logging.getLogger(__name__)

# End of the slice into torchvision's vgg16().features Sequential.
LAYER_END = {"conv5_3": 30, "pool5": 31}  # 29 = ReLU after conv5_3, 30 = final MaxPool2d


def build_trunk(layer: str, weights: str = "torchvision", seed: int = 0) -> torch.nn.Module:
    """Build the VGG16 feature trunk up to the requested tap point.

    ``weights`` is one of:
      - "torchvision": torchvision's pretrained ImageNet weights (RGB
        convention -- pair with the "torchvision" preprocessing mode;
        downloads on first use)
      - "random": seeded random initialization, deterministic; only useful
        for tests and smoke runs
      - a path to a .pth state dict -- either a full VGG16 model dict
        (keys "features.*") or a features-only dict.  Weights converted
        from the original VGG16 release expect "caffe" preprocessing.
    """
    if layer not in LAYER_END:
        raise ExtractionError(f"unknown layer {layer!r} (expected one of {sorted(LAYER_END)})")
    if weights == "torchvision":
        net = models.vgg16(weights=models.VGG16_Weights.IMAGENET1K_V1)
        features = net.features
    elif weights == "random":
        torch.manual_seed(seed)
        features = models.vgg16(weights=None).features
    else:
        path = Path(weights)
        if not path.is_file():
            raise ExtractionError(f"weights file not found: {path}")
        state = torch.load(path, map_location="cpu", weights_only=True)
        net = models.vgg16(weights=None)
        try:
            if any(k.startswith("features.") for k in state):
                net.load_state_dict(state)
            else:
                net.features.load_state_dict(state)
        except RuntimeError as e:
            raise ExtractionError(f"weights in {path} do not fit the VGG16 architecture: {e}") from None
        features = net.features
        logger.info("loaded VGG16 weights from %s", path)
    trunk = features[: LAYER_END[layer]]
    trunk.eval()
    for p in trunk.parameters():
        p.requires_grad_(False)
    return trunk


def run_trunk(trunk: torch.nn.Module, batch: torch.Tensor):
    """One image through the trunk -> (K, W, H) float64 numpy array.

    The network emits (channels, height, width); the file layout wants the
    width axis first, so the spatial axes are swapped here.
    """
    with torch.inference_mode():
        out = trunk(batch)
    chw = out.squeeze(0).numpy()  # (K, H, W)
    return chw.transpose(0, 2, 1).astype("float64")
