"""crow-extract: images in, .crowt activation tensors out."""

import argparse
import logging
import sys

from .errors import ExtractionError
from .extract import ExtractionJob, extract
from .model import LAYER_END
from .preprocess import CAFFE_BGR_MEAN, PREPROC_MODES


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="crow-extract",
        description="Extract VGG16 activation tensors from images at their original size.",
    )
    p.add_argument("--images", required=True,
                   help="image directory, or manifest of <path> / <id>TAB<path> lines")
    p.add_argument("--layer", choices=sorted(LAYER_END), default="pool5",
                   help="network tap point (default pool5)")
    p.add_argument("--out", required=True, help="output directory for .crowt files")
    p.add_argument("--queries", metavar="GT_DIR",
                   help="ground-truth directory; its *_query.txt crops are extracted to <out>/queries/")
    p.add_argument("--weights", default="torchvision",
                   help="'torchvision' (pretrained, RGB), 'random' (seeded, for smoke tests), "
                        "or a .pth state-dict path (default torchvision)")
    p.add_argument("--preproc", choices=PREPROC_MODES, default="caffe",
                   help="input convention; must match where the weights came from (default caffe)")
    p.add_argument("--mean", nargs=3, type=float, metavar=("B", "G", "R"),
                   default=list(CAFFE_BGR_MEAN),
                   help="mean pixel for caffe-mode centering (default %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="seed for --weights random")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    job = ExtractionJob(
        images=args.images,
        out_dir=args.out,
        layer=args.layer,
        queries=args.queries,
        weights=args.weights,
        preproc=args.preproc,
        mean=tuple(args.mean),
        seed=args.seed,
    )
    try:
        written = extract(job)
    except ExtractionError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(f"wrote {len(written)} tensors to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
