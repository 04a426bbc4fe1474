"""Flat exhaustive cosine-similarity search over unit descriptors.

The index is a dense matrix of unit vectors; a query is one matrix-vector
product followed by a stable sort, so results are exact and ties resolve
by insertion order.  Average query expansion re-queries once with the
normalized sum of the first ranking's top results.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .aggregation import FINAL, NORMALIZED, Descriptor, check_unit_norm
from .errors import DataError, DimensionError, ParameterError

logger = logging.getLogger(__name__)

#: Default number of top results summed for query expansion.
DEFAULT_QE_M = 10


@dataclass(frozen=True)
class Index:
    """Immutable search index: ids plus a row-per-entry unit-vector matrix."""

    ids: tuple
    matrix: np.ndarray

    def __post_init__(self) -> None:
        ids = tuple(self.ids)
        m = np.ascontiguousarray(self.matrix, dtype=np.float64)
        if m.ndim != 2:
            raise DimensionError(f"index matrix must be 2-d, got shape {m.shape}")
        if len(ids) != m.shape[0]:
            raise DimensionError(f"{len(ids)} ids for {m.shape[0]} matrix rows")
        positions = {ident: n for n, ident in enumerate(ids)}
        if len(positions) != len(ids):
            raise DataError("index ids are not unique")
        m.flags.writeable = False
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "_positions", positions)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    def position(self, ident: str) -> int:
        """Insertion position of an id (the tie-breaking order)."""
        return self._positions[ident]


@dataclass(frozen=True)
class RankedList:
    """Result of one query: (id, score) pairs with non-increasing scores."""

    query_id: str
    items: tuple
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        items = tuple((ident, float(score)) for ident, score in self.items)
        for (_, a), (_, b) in zip(items, items[1:]):
            if b > a:
                raise DataError(f"ranked list for {self.query_id!r} has increasing scores")
        object.__setattr__(self, "items", items)

    def ids(self) -> list:
        return [ident for ident, _ in self.items]

    def __len__(self) -> int:
        return len(self.items)


def build_index(descriptors: Iterable[Descriptor]) -> Index:
    """Collect unit descriptors into an index, skipping all-zero ones.

    Entries are normally final-stage; normalized-stage descriptors are
    accepted too so whitening-free pipelines can be searched.  Duplicate
    ids and mixed dimensions are errors; all-zero (blank-image)
    descriptors are left out with a warning.
    """
    ids = []
    rows = []
    dim = None
    for d in descriptors:
        if d.stage not in (NORMALIZED, FINAL):
            raise ParameterError(f"index entries must be normalized- or final-stage, got {d.stage!r} for {d.id!r}")
        if d.is_zero:
            logger.warning("build_index: skipping all-zero descriptor %r", d.id)
            continue
        check_unit_norm(d)
        if dim is None:
            dim = d.dim
        elif d.dim != dim:
            raise DimensionError(f"descriptor {d.id!r} has dim {d.dim}, expected {dim}")
        ids.append(d.id)
        rows.append(d.values)
    matrix = np.stack(rows) if rows else np.zeros((0, 0))
    return Index(tuple(ids), matrix)


def query(idx: Index, q: Descriptor, top_n: Optional[int] = None) -> RankedList:
    """Exhaustive cosine scoring of the whole index against one query.

    Scores are double-precision dot products (entries and query are unit
    length); the full ranking, or its ``top_n`` prefix, comes back ordered
    by descending score with exact-tie groups in insertion order.
    """
    if top_n is not None and top_n < 1:
        raise ParameterError(f"top_n must be >= 1, got {top_n}")
    if q.stage not in (NORMALIZED, FINAL):
        raise ParameterError(f"query must be a normalized- or final-stage descriptor, got {q.stage!r}")
    if q.is_zero:
        raise DataError(f"query descriptor {q.id!r} is all-zero; nothing to rank by")
    check_unit_norm(q)
    if len(idx) == 0:
        return RankedList(q.id, ())
    if q.dim != idx.dim:
        raise DimensionError(f"query dim {q.dim} does not match index dim {idx.dim}")
    return RankedList(q.id, _rank(idx, q.values, top_n))


def _rank(idx: Index, vector: np.ndarray, top_n: Optional[int]) -> tuple:
    scores = idx.matrix @ vector
    order = np.argsort(-scores, kind="stable")
    if top_n is not None:
        order = order[:top_n]
    return tuple((idx.ids[n], float(scores[n])) for n in order)


def query_expand(idx: Index, q: Descriptor, m: int = DEFAULT_QE_M) -> RankedList:
    """Average query expansion: re-query with the mean of the top results.

    Runs the plain query, sums the indexed vectors of its top ``m`` results
    (the results only — the original query vector is not added), normalizes
    the sum, and queries again.  ``m`` larger than the index is clamped and
    noted in the result metadata.  If the top results cancel to a zero sum,
    the first ranking is returned with a "qe_degenerate" note instead.
    """
    if m < 1:
        raise ParameterError(f"query expansion needs m >= 1, got {m}")
    if len(idx) == 0:
        raise DataError("query expansion needs a non-empty index")
    first = query(idx, q)
    meta = {"qe_m": m}
    if m > len(idx):
        meta["qe_m"] = len(idx)
        meta["qe_m_clamped_from"] = m
    positions = [idx.position(ident) for ident, _ in first.items[: meta["qe_m"]]]
    summed = idx.matrix[positions].sum(axis=0)
    norm = float(np.sqrt((summed * summed).sum()))
    if norm == 0.0:
        meta["qe_degenerate"] = True
        return RankedList(q.id, first.items, meta)
    return RankedList(q.id, _rank(idx, summed / norm, None), meta)
