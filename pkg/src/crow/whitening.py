"""PCA whitening for descriptors: fit on one image set, apply to another.

Fitting centers the training descriptors, eigendecomposes their sample
covariance, keeps the leading eigenvectors, and stores inverse-sqrt
eigenvalue scales.  Applying a model is ``scales * (P @ (x - mean))``
followed by a final normalization.

Models travel in the ".croww" container:

    offset        size    field
    0             4       magic "CRWW"
    4             1       version (1)
    5             4       input dim K, u32 LE
    9             4       output dim K', u32 LE
    13            4*K     mean, float32 LE
    13+4K         4*K'*K  projection, float32 LE, row-major (K' rows)
    13+4K+4K'K    4*K'    scales, float32 LE
    ...           8       eigenvalue floor delta, float64 LE
    ...           32      training-set fingerprint (SHA-256)

Eigenvalues are kept on the fitted model for inspection but are not
serialized; a model read from disk carries ``eigenvalues=None``.
"""

from __future__ import annotations

import hashlib
import io
import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Optional, Union

import numpy as np

from .aggregation import (
    FINAL,
    MAX_DESCRIPTOR_DIM,
    NORMALIZED,
    WHITENED,
    Descriptor,
)
from .errors import DataError, DimensionError, FormatError, ParameterError
from .tensor import _read_exact
from .weighting import generalized_norm

logger = logging.getLogger(__name__)

MODEL_MAGIC = b"CRWW"
MODEL_VERSION = 1
MODEL_HEADER = struct.Struct("<4sBII")
FINGERPRINT_LEN = 32

#: Tolerance on row orthonormality of the projection (covers float32 storage).
ORTHO_TOL = 1e-5


@dataclass(frozen=True)
class WhiteningModel:
    """Centering + projection + scaling learned from a descriptor set.

    ``projection`` rows are the leading covariance eigenvectors (orthonormal,
    eigenvalues non-increasing); ``scales`` is 1/sqrt(eigenvalue + delta).
    ``fingerprint`` identifies the training set and settings for provenance.
    """

    mean: np.ndarray
    projection: np.ndarray
    scales: np.ndarray
    delta: float
    fingerprint: bytes = b"\x00" * FINGERPRINT_LEN
    eigenvalues: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        mean = np.ascontiguousarray(self.mean, dtype=np.float64)
        proj = np.ascontiguousarray(self.projection, dtype=np.float64)
        scales = np.ascontiguousarray(self.scales, dtype=np.float64)
        if mean.ndim != 1 or mean.size < 1:
            raise DimensionError(f"mean must be a non-empty vector, got shape {mean.shape}")
        if proj.ndim != 2 or proj.shape[1] != mean.shape[0]:
            raise DimensionError(f"projection shape {proj.shape} does not match input dim {mean.shape[0]}")
        if not 1 <= proj.shape[0] <= proj.shape[1]:
            raise DimensionError(f"projection must have 1..K rows, got shape {proj.shape}")
        if scales.shape != (proj.shape[0],):
            raise DimensionError(f"scales shape {scales.shape} does not match output dim {proj.shape[0]}")
        for name, arr in (("mean", mean), ("projection", proj), ("scales", scales)):
            if not np.isfinite(arr).all():
                raise DataError(f"whitening model {name} contains NaN or Inf")
        if (scales <= 0).any():
            raise DataError("whitening scales must be positive")
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise DataError(f"eigenvalue floor must be a positive real, got {self.delta}")
        if len(self.fingerprint) != FINGERPRINT_LEN:
            raise DataError(f"fingerprint must be {FINGERPRINT_LEN} bytes, got {len(self.fingerprint)}")
        gram = proj @ proj.T
        if np.abs(gram - np.eye(proj.shape[0])).max() > ORTHO_TOL:
            raise DataError("projection rows are not orthonormal")
        if self.eigenvalues is not None:
            eig = np.ascontiguousarray(self.eigenvalues, dtype=np.float64)
            if eig.shape != (proj.shape[0],):
                raise DimensionError(f"eigenvalues shape {eig.shape} does not match output dim {proj.shape[0]}")
            if not np.isfinite(eig).all() or (eig < 0).any():
                raise DataError("eigenvalues must be finite and non-negative")
            eig.flags.writeable = False
            object.__setattr__(self, "eigenvalues", eig)
        for name, arr in (("mean", mean), ("projection", proj), ("scales", scales)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def input_dim(self) -> int:
        return self.mean.shape[0]

    @property
    def output_dim(self) -> int:
        return self.projection.shape[0]


def fit_whitening(
    descriptors: Iterable[Descriptor],
    output_dim: int,
    delta: Optional[float] = None,
    config_tag: str = "",
) -> WhiteningModel:
    """Learn whitening parameters from normalized-stage descriptors.

    The sample covariance (N-1 denominator) is eigendecomposed and the top
    ``output_dim`` eigenpairs retained; ``output_dim`` may not exceed the
    rank bound min(K, N-1).  ``delta`` floors the eigenvalues inside the
    inverse-sqrt scales; by default it is 1e-9 times the largest eigenvalue,
    so near-null directions cannot blow up.  Eigenvector signs are fixed by
    making each row's largest-magnitude entry positive, which makes the fit
    byte-reproducible.  All-zero descriptors are skipped with a warning.
    ``config_tag`` is free text (normally the pipeline configuration) mixed
    into the provenance fingerprint along with the sorted training ids.
    """
    kept = []
    ids = []
    skipped = 0
    for d in descriptors:
        if d.stage != NORMALIZED:
            raise ParameterError(f"whitening is fitted on normalized-stage descriptors; {d.id!r} is at {d.stage!r}")
        if d.is_zero:
            skipped += 1
            continue
        kept.append(d.values)
        ids.append(d.id)
    if skipped:
        logger.warning("fit_whitening: skipped %d all-zero descriptor(s)", skipped)
    n = len(kept)
    if n < 2:
        raise DataError(f"whitening needs at least 2 usable descriptors, got {n}")
    x = np.stack(kept)
    k = x.shape[1]
    bound = min(k, n - 1)
    if not 1 <= output_dim <= bound:
        raise ParameterError(
            f"output dim must be in [1, {bound}] (min of input dim {k} and N-1 = {n - 1}), got {output_dim}"
        )
    if delta is not None and not (math.isfinite(delta) and delta > 0):
        raise ParameterError(f"delta must be a positive real, got {delta}")

    mean = x.mean(axis=0)
    centered = x - mean
    cov = (centered.T @ centered) / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    # eigh returns ascending order; keep the top output_dim, descending.
    eigvals = np.maximum(eigvals[::-1][:output_dim], 0.0)
    rows = eigvecs[:, ::-1][:, :output_dim].T.copy()
    for row in rows:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    top = float(eigvals[0])
    delta_used = delta if delta is not None else (1e-9 * top if top > 0 else 1e-12)
    scales = 1.0 / np.sqrt(eigvals + delta_used)

    h = hashlib.sha256()
    for ident in sorted(ids):
        h.update(ident.encode("utf-8"))
        h.update(b"\x00")
    h.update(struct.pack("<Id", output_dim, delta_used))
    h.update(config_tag.encode("utf-8"))
    return WhiteningModel(mean, rows, scales, delta_used, h.digest(), eigenvalues=eigvals)


def apply_whitening(d: Descriptor, m: WhiteningModel) -> Descriptor:
    """Center, project, and scale one normalized descriptor.

    An all-zero (blank-image) descriptor stays an all-zero descriptor of
    the output dimension; centering it would fabricate a nonzero vector.
    """
    if d.stage != NORMALIZED:
        raise ParameterError(f"whitening applies to normalized-stage descriptors, got stage {d.stage!r}")
    if d.dim != m.input_dim:
        raise DimensionError(f"descriptor dim {d.dim} does not match model input dim {m.input_dim}")
    if d.is_zero:
        return Descriptor(np.zeros(m.output_dim), id=d.id, stage=WHITENED)
    y = m.scales * (m.projection @ (d.values - m.mean))
    return Descriptor(y, id=d.id, stage=WHITENED)


def finalize(d: Descriptor, order: str = "l2") -> Descriptor:
    """Normalize a whitened descriptor into its final, comparable form."""
    if d.stage != WHITENED:
        raise ParameterError(f"finalize expects a whitened-stage descriptor, got stage {d.stage!r}")
    n = generalized_norm(d.values, order)
    if n == 0.0:
        return Descriptor(np.zeros_like(d.values), id=d.id, stage=FINAL)
    return Descriptor(d.values / n, id=d.id, stage=FINAL)


# -- .croww container ----------------------------------------------------


def write_model(m: WhiteningModel, sink: Union[str, Path, BinaryIO]) -> None:
    """Write a whitening model as a .croww file (parameters in float32)."""
    if isinstance(sink, (str, Path)):
        with open(sink, "wb") as f:
            write_model(m, f)
        return
    for name, arr in (("mean", m.mean), ("projection", m.projection), ("scales", m.scales)):
        with np.errstate(over="ignore"):
            if not np.isfinite(arr.astype("<f4")).all():
                raise DataError(f"whitening model {name} overflows float32")
    sink.write(MODEL_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, m.input_dim, m.output_dim))
    sink.write(m.mean.astype("<f4").tobytes(order="C"))
    sink.write(m.projection.astype("<f4").tobytes(order="C"))
    sink.write(m.scales.astype("<f4").tobytes(order="C"))
    sink.write(struct.pack("<d", m.delta))
    sink.write(m.fingerprint)


def read_model(source: Union[str, Path, BinaryIO, bytes]) -> WhiteningModel:
    """Read a .croww file, validating structure and orthonormality."""
    if isinstance(source, (str, Path)):
        with open(source, "rb") as f:
            data = f.read()
        return read_model(data)
    if isinstance(source, bytes):
        buf = io.BytesIO(source)
        m = _read_model_stream(buf)
        if buf.read(1):
            raise FormatError("trailing bytes after whitening model")
        return m
    return _read_model_stream(source)


def _read_model_stream(source: BinaryIO) -> WhiteningModel:
    raw = _read_exact(source, MODEL_HEADER.size, "whitening model header")
    magic, version, k, k_out = MODEL_HEADER.unpack(raw)
    if magic != MODEL_MAGIC:
        raise FormatError(f"bad magic {magic!r}; not a whitening model file")
    if version != MODEL_VERSION:
        raise FormatError(f"unsupported whitening model version {version}")
    if k < 1 or not 1 <= k_out <= k:
        raise FormatError(f"bad whitening dims: input {k}, output {k_out}")
    if k > MAX_DESCRIPTOR_DIM:
        raise DataError(f"whitening input dim {k} exceeds the {MAX_DESCRIPTOR_DIM} guard")

    def floats(count, what):
        payload = _read_exact(source, 4 * count, what)
        return np.frombuffer(payload, dtype="<f4", count=count).astype(np.float64)

    mean = floats(k, f"{k} mean values")
    proj = floats(k_out * k, f"{k_out}x{k} projection values").reshape(k_out, k)
    scales = floats(k_out, f"{k_out} scale values")
    (delta,) = struct.unpack("<d", _read_exact(source, 8, "eigenvalue floor"))
    fingerprint = _read_exact(source, FINGERPRINT_LEN, "fingerprint")
    return WhiteningModel(mean, proj, scales, delta, fingerprint)
