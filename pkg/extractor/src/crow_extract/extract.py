"""Batch extraction of activation tensors from image files.

One tensor file per image, named ``<id>.crowt``, plus a ``manifest.tsv``
fixing the corpus order.  Query crops (from retrieval ground-truth files)
go to a ``queries/`` subdirectory with their own manifest, so database and
query tensors can be aggregated separately.

Images run through the network one at a time -- spatial dimensions differ
per image, so there is nothing to batch -- and each output file is written
atomically.  Undecodable or too-small images are skipped with a warning;
a query whose bounding box disagrees with its image is a hard error.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from PIL import UnidentifiedImageError

from .errors import ExtractionError
from .model import build_trunk, run_trunk
from .preprocess import (
    CAFFE_BGR_MEAN,
    crop_query,
    is_image_file,
    load_image,
    to_input,
)
from .tensorio import write_crowt, write_manifest

logger = logging.getLogger(__name__)

# Query identifiers in some ground-truth releases carry a collection prefix
# that the image files do not.
QUERY_IMAGE_PREFIXES = ("oxc1_",)


@dataclass
class ExtractionJob:
    """Everything one extraction run needs.

    ``images`` may be a directory of image files, a manifest file (lines of
    ``<path>`` or ``<id>\\t<path>``), or an explicit list of paths.
    ``queries`` optionally names a ground-truth directory whose
    ``*_query.txt`` files define cropped query extractions.
    """

    images: object
    out_dir: object
    layer: str = "pool5"
    queries: Optional[object] = None
    weights: str = "torchvision"
    preproc: str = "caffe"
    mean: tuple = CAFFE_BGR_MEAN
    seed: int = 0


def resolve_images(images) -> list[tuple[str, Path]]:
    """Normalize the job's image source into (id, path) pairs."""
    if isinstance(images, (list, tuple)):
        return [(Path(p).stem, Path(p)) for p in images]
    src = Path(images)
    if src.is_dir():
        return [(p.stem, p) for p in sorted(src.iterdir()) if is_image_file(p)]
    if not src.is_file():
        raise ExtractionError(f"image source not found: {src}")
    out = []
    for line in src.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) == 1:
            path = Path(parts[0])
            out.append((path.stem, path if path.is_absolute() else src.parent / path))
        elif len(parts) == 2:
            path = Path(parts[1])
            out.append((parts[0], path if path.is_absolute() else src.parent / path))
        else:
            raise ExtractionError(f"{src}: manifest line has {len(parts)} fields: {line!r}")
    return out


def parse_query_crops(gt_dir) -> list[tuple[str, str, tuple]]:
    """Read (query-id, image-id, bbox) from a ground-truth directory.

    Only the ``*_query.txt`` files are consulted (one line each:
    ``<image> <x1> <y1> <x2> <y2>``); the relevance lists are the
    evaluator's business, not the extractor's.
    """
    gt_dir = Path(gt_dir)
    files = sorted(gt_dir.glob("*_query.txt"))
    if not files:
        raise ExtractionError(f"no *_query.txt files in {gt_dir}")
    out = []
    for f in files:
        parts = f.read_text(encoding="utf-8").split()
        if len(parts) != 5:
            raise ExtractionError(f"{f.name}: expected '<image> x1 y1 x2 y2', got {parts!r}")
        image_id = parts[0]
        for prefix in QUERY_IMAGE_PREFIXES:
            if image_id.startswith(prefix):
                image_id = image_id[len(prefix):]
        try:
            bbox = tuple(float(v) for v in parts[1:])
        except ValueError:
            raise ExtractionError(f"{f.name}: malformed bounding box in {parts!r}") from None
        out.append((f.name[: -len("_query.txt")], image_id, bbox))
    return out


def extract(job: ExtractionJob) -> list[tuple[str, Path]]:
    """Run the job; returns (id, path) for every tensor written."""
    pairs = resolve_images(job.images)
    if not pairs:
        raise ExtractionError("no images to extract")
    out_dir = Path(job.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    trunk = build_trunk(job.layer, job.weights, job.seed)

    written: list[tuple[str, Path]] = []
    manifest = []
    by_id: dict[str, Path] = {}
    for image_id, path in pairs:
        by_id[image_id] = path
        try:
            img = load_image(path)
            batch = to_input(img, job.preproc, job.mean)
        except (OSError, UnidentifiedImageError) as e:
            logger.warning("skipping %s: %s", path, e)
            continue
        except ExtractionError as e:
            logger.warning("skipping %s: %s", path, e)
            continue
        data = run_trunk(trunk, batch)
        dest = out_dir / f"{image_id}.crowt"
        write_crowt(data, dest)
        written.append((image_id, dest))
        manifest.append((image_id, dest.name))
        logger.info("%s -> %s %s", path.name, dest.name, data.shape)
    if manifest:
        write_manifest(manifest, out_dir / "manifest.tsv")

    if job.queries is not None:
        q_dir = out_dir / "queries"
        q_dir.mkdir(exist_ok=True)
        q_manifest = []
        for query_id, image_id, bbox in parse_query_crops(job.queries):
            if image_id not in by_id:
                raise ExtractionError(f"query {query_id!r} wants image {image_id!r}, which is not in the input set")
            img = load_image(by_id[image_id])  # a query image that fails to decode is a hard error
            batch = to_input(crop_query(img, bbox), job.preproc, job.mean)
            data = run_trunk(trunk, batch)
            dest = q_dir / f"{query_id}.crowt"
            write_crowt(data, dest)
            written.append((query_id, dest))
            q_manifest.append((query_id, dest.name))
            logger.info("query %s (%s cropped) -> %s %s", query_id, image_id, dest.name, data.shape)
        write_manifest(q_manifest, q_dir / "manifest.tsv")
    return written
