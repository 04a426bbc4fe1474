"""Synthetic activation corpora with class-structured sparsity.

Generates small labeled tensor sets that mimic the structure the weighted
pipeline exploits: images of the same class share a set of "signature"
channels that fire sparsely but strongly, every image carries dense
"bursty" channels whose magnitude is uninformative, and the remaining
channels hold occasional weak noise.  Plain sum aggregation separates the
classes reasonably well; sparsity-sensitive channel weighting separates
them better, because the bursty channels respond everywhere (low weight)
while the signature channels respond rarely (high weight).

Useful for end-to-end retrieval exercises and demos without any real
feature data.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError
from .evaluator import GroundTruth
from .tensor import FeatureTensor


def make_corpus(
    n_classes: int = 3,
    per_class: int = 20,
    channels: int = 64,
    width: int = 8,
    height: int = 8,
    signature_channels: int = 8,
    bursty_channels: int = 8,
    seed: int = 7,
) -> list[FeatureTensor]:
    """Generate ``n_classes * per_class`` labeled tensors.

    Ids look like ``class0_07``; the prefix before the underscore is the
    class label (see ``class_of``).  Each class owns a disjoint block of
    ``signature_channels`` channels, active at roughly a quarter of the
    locations with amplitude near 1.  The last ``bursty_channels`` channels
    are active everywhere in every image, with a random per-image gain that
    makes their magnitude pure noise.  Deterministic for a given seed.
    """
    if n_classes < 1 or per_class < 1:
        raise ParameterError(f"need at least one class and one image per class, got {n_classes}x{per_class}")
    if channels < n_classes * signature_channels + bursty_channels:
        raise ParameterError(
            f"{channels} channels cannot hold {n_classes} signature blocks of "
            f"{signature_channels} plus {bursty_channels} bursty channels"
        )
    rng = np.random.default_rng(seed)
    noise_lo = n_classes * signature_channels
    noise_hi = channels - bursty_channels
    corpus = []
    for c in range(n_classes):
        for image in range(per_class):
            data = np.zeros((channels, width, height))
            # Class signature: sparse, strong responses on this class's block.
            for k in range(c * signature_channels, (c + 1) * signature_channels):
                mask = rng.random((width, height)) < 0.25
                data[k][mask] = rng.uniform(0.8, 1.2, int(mask.sum()))
            # Occasional weak background responses elsewhere.
            for k in range(noise_lo, noise_hi):
                if rng.random() < 0.3:
                    spots = int(rng.integers(1, 4))
                    xs = rng.integers(0, width, spots)
                    ys = rng.integers(0, height, spots)
                    data[k, xs, ys] = rng.uniform(0.0, 0.3, spots)
            # Bursty channels: dense everywhere, magnitude scrambled per image.
            for k in range(noise_hi, channels):
                gain = rng.uniform(0.2, 2.6)
                data[k] = gain * rng.uniform(0.05, 0.6, (width, height))
            corpus.append(FeatureTensor(data, id=f"class{c}_{image:02d}"))
    return corpus


def class_of(ident: str) -> str:
    """Class label of a generated image id (the part before the underscore)."""
    return ident.split("_", 1)[0]


def corpus_groundtruth(ids) -> list[GroundTruth]:
    """Every image queries for its own class (itself included, junk empty)."""
    ids = list(ids)
    by_class: dict[str, list[str]] = {}
    for ident in ids:
        by_class.setdefault(class_of(ident), []).append(ident)
    return [
        GroundTruth(ident, ident, None, frozenset(by_class[class_of(ident)]))
        for ident in ids
    ]
