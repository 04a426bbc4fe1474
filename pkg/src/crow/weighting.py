"""Spatial and channel weight computation for feature aggregation.

Two non-parametric weightings are derived from a (pooled) activation tensor:

* a spatial map built from the per-location response summed across all
  channels, normalized and power-scaled (``alpha_ij``), and
* per-channel weights from response sparsity, an IDF-style boost for
  channels that fire rarely (``beta_k``).

Uniform variants and a Gaussian centering prior cover the unweighted and
center-prior pipeline configurations.  A weight map can be dumped as a
16-bit PGM for visual inspection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Optional, Union

import numpy as np

from .errors import DataError, DimensionError, ParameterError
from .tensor import FeatureTensor

#: Activations with magnitude below this are treated as zero when counting
#: per-channel response sparsity; it absorbs float dust left by pooling.
ZERO_RESPONSE = 1e-12

#: Stabilizer for the IDF-style channel weights.
DEFAULT_EPSILON = 1e-6

#: Width of the centering prior relative to the shorter spatial side.
DEFAULT_SIGMA_FRACTION = 1.0 / 3.0

#: Supported norm orders; "power" is the a = 0.5 power-normalization.
NORM_ORDERS = ("l1", "l2", "linf", "power")


def generalized_norm(values, order: str) -> float:
    """(sum |v|^a)^(1/a) with a = 1, 2, or 0.5 for l1/l2/power; linf is max."""
    v = np.abs(np.asarray(values, dtype=np.float64)).ravel()
    if order == "l1":
        return float(v.sum())
    if order == "l2":
        return float(np.sqrt((v * v).sum()))
    if order == "linf":
        return float(v.max())
    if order == "power":
        return float(np.sqrt(v).sum() ** 2)
    raise ParameterError(f"unknown norm order {order!r}; expected one of {NORM_ORDERS}")


@dataclass(frozen=True)
class SpatialNormSpec:
    """How the aggregate response map is scaled into spatial weights.

    The map is divided by its ``order`` norm (see ``NORM_ORDERS``) and then
    raised to ``1/power``.  Defaults: L2 norm, power 2 (square root).
    """

    order: str = "l2"
    power: float = 2.0

    def __post_init__(self) -> None:
        if self.order not in NORM_ORDERS:
            raise ParameterError(f"unknown norm order {self.order!r}; expected one of {NORM_ORDERS}")
        if not (math.isfinite(self.power) and self.power > 0):
            raise ParameterError(f"power must be a positive real, got {self.power}")


@dataclass(frozen=True)
class SpatialWeightMap:
    """Per-location weights over a W x H grid, held read-only in float64."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or min(w.shape) < 1:
            raise DimensionError(f"weight map must be 2-d (W, H) with positive dims, got shape {w.shape}")
        if not np.isfinite(w).all():
            raise DataError("weight map contains NaN or Inf")
        if (w < 0).any():
            raise DataError("weight map contains negative weights")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def width(self) -> int:
        return self.weights.shape[0]

    @property
    def height(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class ChannelWeights:
    """Per-channel weights, plus the sparsities they were derived from.

    ``sparsities`` and ``epsilon`` are None for uniform weights, which do
    not come from any tensor.
    """

    weights: np.ndarray
    sparsities: Optional[np.ndarray] = None
    epsilon: Optional[float] = None

    def __post_init__(self) -> None:
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size < 1:
            raise DimensionError(f"channel weights must be a non-empty vector, got shape {w.shape}")
        if not np.isfinite(w).all():
            raise DataError("channel weights contain NaN or Inf")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        if self.sparsities is not None:
            s = np.ascontiguousarray(self.sparsities, dtype=np.float64)
            if s.shape != w.shape:
                raise DimensionError(f"sparsities shape {s.shape} does not match weights shape {w.shape}")
            if not np.isfinite(s).all() or (s < 0).any() or (s > 1).any():
                raise DataError("sparsities must lie in [0, 1]")
            s.flags.writeable = False
            object.__setattr__(self, "sparsities", s)

    @property
    def count(self) -> int:
        return self.weights.shape[0]


def spatial_weights(t: FeatureTensor, spec: SpatialNormSpec = SpatialNormSpec()) -> SpatialWeightMap:
    """Spatial weights from the aggregate response across channels.

    Sums the tensor over its channel axis, divides the resulting map by its
    ``spec.order`` norm, and raises it to ``1/spec.power``.  Activations
    must be non-negative (ReLU-derived layers); fractional powers of
    negative responses are undefined.  An all-zero tensor yields the
    all-zero map rather than dividing by zero.
    """
    if not t.nonneg:
        raise DataError("spatial weighting requires non-negative activations (use a post-ReLU layer)")
    raw = t.data.sum(axis=0)
    denom = generalized_norm(raw, spec.order)
    if denom == 0.0:
        return SpatialWeightMap(np.zeros_like(raw))
    return SpatialWeightMap((raw / denom) ** (1.0 / spec.power))


def channel_sparsities(t: FeatureTensor) -> np.ndarray:
    """Per-channel fraction of locations with no response.

    A location counts as responding when its activation is >= ``ZERO_RESPONSE``.
    The result is 1 - Q_k where Q_k is the responding fraction of channel k.
    """
    q = (t.data >= ZERO_RESPONSE).mean(axis=(1, 2))
    return 1.0 - q


def channel_weights(t: FeatureTensor, epsilon: float = DEFAULT_EPSILON) -> ChannelWeights:
    """Sparsity-sensitive channel weights, in the spirit of inverse document frequency.

    Each channel gets ``log((K*epsilon + sum_h Q_h) / (epsilon + Q_k))`` where
    Q_k is its responding fraction: channels that fire rarely are boosted,
    and ``epsilon`` keeps fully silent channels finite.
    """
    if not (math.isfinite(epsilon) and epsilon > 0):
        raise ParameterError(f"epsilon must be > 0, got {epsilon}")
    xi = channel_sparsities(t)
    q = 1.0 - xi
    weights = np.log((t.channels * epsilon + q.sum()) / (epsilon + q))
    return ChannelWeights(weights, sparsities=xi, epsilon=epsilon)


def uniform_spatial(width: int, height: int) -> SpatialWeightMap:
    """All-ones spatial map (no spatial weighting)."""
    if width < 1 or height < 1:
        raise DimensionError(f"map dims must be positive, got {width}x{height}")
    return SpatialWeightMap(np.ones((width, height)))


def uniform_channel(count: int) -> ChannelWeights:
    """All-ones channel weights (no channel weighting)."""
    if count < 1:
        raise DimensionError(f"channel count must be positive, got {count}")
    return ChannelWeights(np.ones(count))


def centering_prior(width: int, height: int, sigma_fraction: float = DEFAULT_SIGMA_FRACTION) -> SpatialWeightMap:
    """Isotropic Gaussian prior over the grid, peak value 1 at the center.

    The center sits at ((W-1)/2, (H-1)/2) and the standard deviation is
    ``sigma_fraction * min(W, H)``, so the prior widens with the grid.
    """
    if width < 1 or height < 1:
        raise DimensionError(f"map dims must be positive, got {width}x{height}")
    if not (math.isfinite(sigma_fraction) and sigma_fraction > 0):
        raise ParameterError(f"sigma fraction must be > 0, got {sigma_fraction}")
    sigma = sigma_fraction * min(width, height)
    di = np.arange(width, dtype=np.float64)[:, None] - (width - 1) / 2.0
    dj = np.arange(height, dtype=np.float64)[None, :] - (height - 1) / 2.0
    return SpatialWeightMap(np.exp(-(di * di + dj * dj) / (2.0 * sigma * sigma)))


def write_pgm(m: SpatialWeightMap, sink: Union[str, Path, BinaryIO]) -> None:
    """Dump a weight map as a 16-bit binary PGM, scaled so the peak is white.

    The map's first axis becomes image columns and the second axis rows, so
    a W x H map produces a W-wide, H-tall graymap.  An all-zero map writes
    as all black.
    """
    if isinstance(sink, (str, Path)):
        with open(sink, "wb") as f:
            write_pgm(m, f)
        return
    peak = float(m.weights.max())
    if peak > 0.0:
        pixels = np.round(m.weights * (65535.0 / peak))
    else:
        pixels = np.zeros_like(m.weights)
    sink.write(f"P5\n{m.width} {m.height}\n65535\n".encode("ascii"))
    sink.write(pixels.astype(">u2").T.tobytes(order="C"))
