"""Activation tensor extraction for the crow aggregation pipeline.

Produces `.crowt` files (and corpus manifests) from images with a VGG16
trunk, keeping each image at its original size.  Interoperates with the
aggregation package purely through the file formats.
"""

from .errors import ExtractionError
from .extract import ExtractionJob, extract, parse_query_crops, resolve_images
from .model import LAYER_END, build_trunk, run_trunk
from .preprocess import (
    CAFFE_BGR_MEAN,
    MIN_SIDE,
    PREPROC_MODES,
    TORCHVISION_MEAN,
    TORCHVISION_STD,
    crop_query,
    load_image,
    to_input,
)
from .tensorio import crowt_bytes, write_crowt, write_manifest

__version__ = "0.1.0"
