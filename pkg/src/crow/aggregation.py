"""Cross-dimensional weighting, per-channel sum aggregation, and the
descriptor pipeline.

The pipeline turns an activation tensor into a compact descriptor:

    pool -> spatial weights -> channel weights -> weighted per-channel sums
         -> power/normalize -> (optional) whiten -> final normalize

Every stage is exposed on its own and ``run_pipeline`` is literally their
composition, so a pipeline run can be replayed step by step.  Descriptor
sets travel in the ".crowd" container:

    offset  size  field
    0       4     magic "CRWD"
    4       1     version (1)
    5       1     dtype code (1 = float32 little-endian)
    6       4     dim, u32 LE
    10      4     count N, u32 LE
    14      6     reserved (zero on write, ignored on read)
    20      ...   N records: id length u16 LE, UTF-8 id, dim float32 LE values

Zero-ness of a descriptor is not stored; it is re-derived from the values.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Optional, Union

import numpy as np

from .errors import DataError, DimensionError, FormatError, ParameterError
from .tensor import FeatureTensor, PoolingSpec, local_pool, _read_exact
from .weighting import (
    DEFAULT_EPSILON,
    DEFAULT_SIGMA_FRACTION,
    NORM_ORDERS,
    SpatialNormSpec,
    centering_prior,
    channel_weights,
    generalized_norm,
    spatial_weights,
    uniform_channel,
    uniform_spatial,
)

# Pipeline stages a descriptor can be at.
RAW = "raw"
NORMALIZED = "normalized"
WHITENED = "whitened"
FINAL = "final"
STAGES = (RAW, NORMALIZED, WHITENED, FINAL)

#: Tolerance on the L2 norm of descriptors that claim to be normalized.
UNIT_NORM_TOL = 1e-5

DESC_MAGIC = b"CRWD"
DESC_VERSION = 1
DESC_DTYPE_F32LE = 1
DESC_HEADER = struct.Struct("<4sBBII6x")

#: Guard against absurd dims claimed by a corrupt header.
MAX_DESCRIPTOR_DIM = 2**20


@dataclass(frozen=True)
class Descriptor:
    """A per-image feature vector at a known pipeline stage.

    Blank input (an all-zero tensor) produces an all-zero vector; ``is_zero``
    reports that so whitening fits and indexes can leave such descriptors
    out instead of normalizing them.
    """

    values: np.ndarray
    id: str = ""
    stage: str = RAW

    def __post_init__(self) -> None:
        if self.stage not in STAGES:
            raise ParameterError(f"unknown stage {self.stage!r}; expected one of {STAGES}")
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < 1:
            raise DimensionError(f"descriptor must be a non-empty vector, got shape {v.shape}")
        if not np.isfinite(v).all():
            raise DataError(f"descriptor {self.id!r} contains NaN or Inf")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def is_zero(self) -> bool:
        return not self.values.any()


def check_unit_norm(d: Descriptor) -> None:
    """Raise unless ``d`` is unit length in L2 (within tolerance) or all-zero.

    Normalized/final descriptors are expected to pass; the check runs at
    trust boundaries (deserialization, index build) rather than in the
    constructor, since non-default norm orders legitimately produce vectors
    that are unit in their own norm only.
    """
    if d.is_zero:
        return
    n = float(np.sqrt((d.values * d.values).sum()))
    if abs(n - 1.0) > UNIT_NORM_TOL:
        raise DataError(f"descriptor {d.id!r} at stage {d.stage!r} is not unit length (norm {n:.6g})")


_SPATIAL_KINDS = ("uniform", "crow", "centering")
_CHANNEL_KINDS = ("uniform", "ssw")
_SPATIAL_ALIASES = {"none": "uniform"}
_CHANNEL_ALIASES = {"none": "uniform", "crow-ssw": "ssw"}


@dataclass(frozen=True)
class PipelineConfig:
    """Everything the pipeline needs short of the whitening model itself.

    ``spatial`` picks the spatial weighting ("uniform", "crow" for the
    aggregate-response map, "centering" for the Gaussian prior) and
    ``channel`` the channel weighting ("uniform" or "ssw" for the
    sparsity-sensitive weights).  ``power`` and ``norm_order`` control the
    power-scale/normalize step after aggregation; ``final_norm_order``
    applies after whitening.  ``output_dim`` is the reduced dimensionality
    a whitening model is expected to produce (checked when one is used).
    """

    pooling: PoolingSpec = PoolingSpec.none()
    spatial: str = "uniform"
    channel: str = "uniform"
    spatial_norm: SpatialNormSpec = SpatialNormSpec()
    epsilon: float = DEFAULT_EPSILON
    sigma_fraction: float = DEFAULT_SIGMA_FRACTION
    norm_order: str = "l2"
    power: float = 1.0
    final_norm_order: str = "l2"
    output_dim: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "spatial", _SPATIAL_ALIASES.get(self.spatial, self.spatial))
        object.__setattr__(self, "channel", _CHANNEL_ALIASES.get(self.channel, self.channel))
        if self.spatial not in _SPATIAL_KINDS:
            raise ParameterError(f"unknown spatial weighting {self.spatial!r}; expected one of {_SPATIAL_KINDS}")
        if self.channel not in _CHANNEL_KINDS:
            raise ParameterError(f"unknown channel weighting {self.channel!r}; expected one of {_CHANNEL_KINDS}")
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ParameterError(f"epsilon must be > 0, got {self.epsilon}")
        if not (math.isfinite(self.sigma_fraction) and self.sigma_fraction > 0):
            raise ParameterError(f"sigma fraction must be > 0, got {self.sigma_fraction}")
        for order in (self.norm_order, self.final_norm_order):
            if order not in NORM_ORDERS:
                raise ParameterError(f"unknown norm order {order!r}; expected one of {NORM_ORDERS}")
        if not (math.isfinite(self.power) and self.power > 0):
            raise ParameterError(f"power must be a positive real, got {self.power}")
        if self.output_dim is not None and self.output_dim < 1:
            raise ParameterError(f"output dim must be positive, got {self.output_dim}")

    # -- presets ---------------------------------------------------------

    @classmethod
    def crow(cls, layer: str = "pool5", **overrides) -> "PipelineConfig":
        """Weighted aggregation: response-map spatial + sparsity channel weights."""
        return cls(pooling=_layer_pooling(layer), spatial="crow", channel="ssw", **overrides)

    @classmethod
    def ucrow(cls, layer: str = "pool5", **overrides) -> "PipelineConfig":
        """Unweighted aggregation: plain channel-wise sum pooling."""
        return cls(pooling=_layer_pooling(layer), spatial="uniform", channel="uniform", **overrides)

    @classmethod
    def spoc(cls, **overrides) -> "PipelineConfig":
        """Approximate center-prior reference: Gaussian spatial prior, no pooling."""
        return cls(pooling=PoolingSpec.none(), spatial="centering", channel="uniform", **overrides)


def _layer_pooling(layer: str) -> PoolingSpec:
    # pool5 is already max-pooled by the network; conv5_3 needs one 2x2/2 max.
    if layer == "pool5":
        return PoolingSpec.none()
    if layer == "conv5_3":
        return PoolingSpec.max2x2()
    raise ParameterError(f"unknown source layer {layer!r}; expected 'pool5' or 'conv5_3'")


def preset(name: str, layer: str = "pool5", **overrides) -> PipelineConfig:
    """Look up a named configuration: "crow", "ucrow", or "spoc"."""
    if name == "crow":
        return PipelineConfig.crow(layer, **overrides)
    if name == "ucrow":
        return PipelineConfig.ucrow(layer, **overrides)
    if name == "spoc":
        return PipelineConfig.spoc(**overrides)
    raise ParameterError(f"unknown preset {name!r}; expected 'crow', 'ucrow' or 'spoc'")


def weight_tensor(t: FeatureTensor, alpha, beta) -> FeatureTensor:
    """Scale every activation by its location weight and its channel weight."""
    if (alpha.width, alpha.height) != (t.width, t.height):
        raise DimensionError(
            f"spatial weight map is {alpha.width}x{alpha.height} "
            f"but tensor spatial dims are {t.width}x{t.height}"
        )
    if beta.count != t.channels:
        raise DimensionError(f"channel weights cover {beta.count} channels but tensor has {t.channels}")
    scaled = t.data * alpha.weights[np.newaxis, :, :] * beta.weights[:, np.newaxis, np.newaxis]
    return FeatureTensor(scaled, id=t.id)


def sum_aggregate(t: FeatureTensor) -> Descriptor:
    """Per-channel sum over all spatial locations, accumulated in float64.

    Summation runs in memory order (last spatial axis fastest), which is
    deterministic for a given shape, so repeated runs are bit-identical.
    """
    return Descriptor(t.data.sum(axis=(1, 2)), id=t.id, stage=RAW)


def pnorm(d: Descriptor, order: str = "l2", power: float = 1.0) -> Descriptor:
    """Power-scale then normalize a raw aggregate.

    Applies the signed power ``sign(v) * |v|**power`` (default 1: off), then
    divides by the ``order`` norm.  A zero vector is passed through rather
    than divided.
    """
    if d.stage != RAW:
        raise ParameterError(f"pnorm expects a raw-stage descriptor, got stage {d.stage!r}")
    v = d.values
    if power != 1.0:
        v = np.sign(v) * np.abs(v) ** power
    n = generalized_norm(v, order)
    if n == 0.0:
        return Descriptor(np.zeros_like(v), id=d.id, stage=NORMALIZED)
    return Descriptor(v / n, id=d.id, stage=NORMALIZED)


def _spatial_map(t: FeatureTensor, cfg: PipelineConfig):
    if cfg.spatial == "crow":
        return spatial_weights(t, cfg.spatial_norm)
    if cfg.spatial == "centering":
        return centering_prior(t.width, t.height, cfg.sigma_fraction)
    return uniform_spatial(t.width, t.height)


def _channel_vector(t: FeatureTensor, cfg: PipelineConfig):
    if cfg.channel == "ssw":
        return channel_weights(t, cfg.epsilon)
    return uniform_channel(t.channels)


def run_pipeline(t: FeatureTensor, cfg: PipelineConfig, model=None) -> Descriptor:
    """Run the full descriptor pipeline on one tensor.

    With a whitening model the result is a final-stage descriptor; without
    one the pipeline stops after power/normalization (the form whitening is
    fitted on).  The implementation calls the stage functions directly, so
    its output matches a manual composition float for float.
    """
    pooled = local_pool(t, cfg.pooling)
    alpha = _spatial_map(pooled, cfg)
    beta = _channel_vector(pooled, cfg)
    weighted = weight_tensor(pooled, alpha, beta)
    normalized = pnorm(sum_aggregate(weighted), order=cfg.norm_order, power=cfg.power)
    if model is None:
        return normalized
    if cfg.output_dim is not None and model.output_dim != cfg.output_dim:
        raise ParameterError(
            f"config expects output dim {cfg.output_dim} but whitening model produces {model.output_dim}"
        )
    # Imported here: the whitening module depends on Descriptor from this one.
    from .whitening import apply_whitening, finalize

    return finalize(apply_whitening(normalized, model), order=cfg.final_norm_order)


# -- .crowd container ----------------------------------------------------


def write_descriptors(descriptors: Iterable[Descriptor], sink: Union[str, Path, BinaryIO]) -> None:
    """Write a uniform-dimension descriptor set as a .crowd file."""
    if isinstance(sink, (str, Path)):
        with open(sink, "wb") as f:
            write_descriptors(descriptors, f)
        return
    descs = list(descriptors)
    dim = descs[0].dim if descs else 0
    sink.write(DESC_HEADER.pack(DESC_MAGIC, DESC_VERSION, DESC_DTYPE_F32LE, dim, len(descs)))
    for d in descs:
        if d.dim != dim:
            raise DimensionError(f"descriptor {d.id!r} has dim {d.dim}, expected {dim}")
        idb = d.id.encode("utf-8")
        if len(idb) > 0xFFFF:
            raise DataError(f"descriptor id longer than 65535 UTF-8 bytes: {d.id[:40]!r}...")
        with np.errstate(over="ignore"):
            values = d.values.astype("<f4")
        if not np.isfinite(values).all():
            raise DataError(f"descriptor {d.id!r} overflows float32")
        sink.write(struct.pack("<H", len(idb)))
        sink.write(idb)
        sink.write(values.tobytes(order="C"))


def read_descriptors(source: Union[str, Path, BinaryIO, bytes], stage: str = FINAL) -> list[Descriptor]:
    """Read a .crowd file back into descriptors tagged with ``stage``.

    The container does not record the pipeline stage, so the caller states
    what the file holds (most files hold final or normalized descriptors,
    which are checked for unit length; pass stage="raw" to skip the check
    for unnormalized or exotically normalized sets).
    """
    if stage not in STAGES:
        raise ParameterError(f"unknown stage {stage!r}; expected one of {STAGES}")
    if isinstance(source, (str, Path)):
        with open(source, "rb") as f:
            data = f.read()
        return read_descriptors(data, stage=stage)
    if isinstance(source, bytes):
        buf = io.BytesIO(source)
        out = _read_descriptor_stream(buf, stage)
        if buf.read(1):
            raise FormatError("trailing bytes after final descriptor record")
        return out
    return _read_descriptor_stream(source, stage)


def _read_descriptor_stream(source: BinaryIO, stage: str) -> list[Descriptor]:
    raw = _read_exact(source, DESC_HEADER.size, "descriptor file header")
    magic, version, dtype, dim, count = DESC_HEADER.unpack(raw)
    if magic != DESC_MAGIC:
        raise FormatError(f"bad magic {magic!r}; not a descriptor file")
    if version != DESC_VERSION:
        raise FormatError(f"unsupported descriptor file version {version}")
    if dtype != DESC_DTYPE_F32LE:
        raise FormatError(f"unsupported dtype code {dtype}")
    if count and dim < 1:
        raise FormatError(f"non-empty descriptor file claims dim {dim}")
    if dim > MAX_DESCRIPTOR_DIM:
        raise DataError(f"descriptor dim {dim} exceeds the {MAX_DESCRIPTOR_DIM} guard")
    out = []
    for n in range(count):
        (id_len,) = struct.unpack("<H", _read_exact(source, 2, f"id length of record {n}"))
        try:
            ident = _read_exact(source, id_len, f"id of record {n}").decode("utf-8")
        except UnicodeDecodeError as e:
            raise FormatError(f"record {n} id is not valid UTF-8: {e}") from None
        payload = _read_exact(source, 4 * dim, f"{dim} float32 values of record {n}")
        values = np.frombuffer(payload, dtype="<f4", count=dim).astype(np.float64)
        if not np.isfinite(values).all():
            raise DataError(f"descriptor {ident!r} contains NaN or Inf")
        d = Descriptor(values, id=ident, stage=stage)
        if stage in (NORMALIZED, FINAL):
            check_unit_norm(d)
        out.append(d)
    return out
