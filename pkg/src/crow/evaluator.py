"""Retrieval evaluation: ground-truth parsing, average precision, mAP.

Ground truth follows the buildings-benchmark layout: per query a
``<name>_query.txt`` (image id plus bounding box) and companion
``_good.txt`` / ``_ok.txt`` / ``_junk.txt`` id lists.  Good and ok ids
count as positives; junk ids are dropped from a ranking before scoring,
counting neither for nor against.  A second reader handles group-numbered
image lists where each group's x00 image queries for the rest.

Average precision is the trapezoidal variant used by those benchmarks'
original evaluation code: precision starts at 1, and each ranked positive
adds (recall step) x (mean of the precision before and after it).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Union

from .aggregation import Descriptor
from .errors import DataError, GroundTruthError
from .search import Index, RankedList, query, query_expand

logger = logging.getLogger(__name__)

#: Prefixes stripped from image ids named in query files (the distributed
#: ground truth prefixes query-file ids only; companion lists are bare).
QUERY_ID_PREFIXES = ("oxc1_",)


@dataclass(frozen=True)
class GroundTruth:
    """Relevance sets for one query.

    ``bbox`` is the query crop in pixels (x1, y1, x2, y2), recorded for
    provenance — cropping itself happens at feature extraction.  Group-list
    ground truth has no crop, hence None.
    """

    query_id: str
    image_id: str
    bbox: Optional[tuple]
    good: frozenset
    ok: frozenset = frozenset()
    junk: frozenset = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "good", frozenset(self.good))
        object.__setattr__(self, "ok", frozenset(self.ok))
        object.__setattr__(self, "junk", frozenset(self.junk))
        if self.bbox is not None:
            bbox = tuple(float(v) for v in self.bbox)
            if len(bbox) != 4:
                raise GroundTruthError(f"query {self.query_id!r}: bounding box needs 4 values, got {len(bbox)}")
            object.__setattr__(self, "bbox", bbox)
        for a, b in (("good", "ok"), ("good", "junk"), ("ok", "junk")):
            overlap = getattr(self, a) & getattr(self, b)
            if overlap:
                raise GroundTruthError(
                    f"query {self.query_id!r}: {a} and {b} sets overlap ({sorted(overlap)[:5]})"
                )
        if not (self.good | self.ok):
            raise GroundTruthError(f"query {self.query_id!r} has no positive images")

    @property
    def positives(self) -> frozenset:
        return self.good | self.ok


def _strip_query_prefix(ident: str) -> str:
    for prefix in QUERY_ID_PREFIXES:
        if ident.startswith(prefix):
            return ident[len(prefix):]
    return ident


def _read_id_list(path: Path) -> frozenset:
    seen = set()
    duplicates = 0
    for line in path.read_text(encoding="utf-8").splitlines():
        ident = line.strip()
        if not ident:
            continue
        if ident in seen:
            duplicates += 1
            continue
        seen.add(ident)
    if duplicates:
        logger.warning("%s: ignored %d duplicate id(s)", path.name, duplicates)
    return frozenset(seen)


def parse_groundtruth(gt_dir: Union[str, Path]) -> list[GroundTruth]:
    """Load all queries from a ground-truth directory, sorted by name."""
    gt_dir = Path(gt_dir)
    query_files = sorted(gt_dir.glob("*_query.txt"))
    if not query_files:
        raise GroundTruthError(f"no *_query.txt files found in {gt_dir}")
    out = []
    for query_file in query_files:
        name = query_file.name[: -len("_query.txt")]
        line = query_file.read_text(encoding="utf-8").strip()
        parts = line.split()
        if len(parts) != 5:
            raise GroundTruthError(f"{query_file.name}: expected 'image-id x1 y1 x2 y2', got {line!r}")
        try:
            bbox = tuple(float(p) for p in parts[1:])
        except ValueError:
            raise GroundTruthError(f"{query_file.name}: malformed bounding box in {line!r}") from None
        sets = {}
        for kind in ("good", "ok", "junk"):
            companion = gt_dir / f"{name}_{kind}.txt"
            if not companion.is_file():
                raise GroundTruthError(f"missing ground-truth companion file: {companion.name}")
            sets[kind] = _read_id_list(companion)
        out.append(GroundTruth(name, _strip_query_prefix(parts[0]), bbox, **sets))
    return out


def parse_holidays(source: Union[str, Path, Iterable[str]]) -> list[GroundTruth]:
    """Build ground truth from a group-numbered image list.

    Accepts a text file (or iterable) of image names like ``123501.jpg``,
    one per line.  Images belong to the group ``number // 100``; the
    ``x00`` image of each group is its query, the rest are that query's
    positives.  The query is its own junk entry, so rankings are scored
    with the query image excluded rather than self-matched.
    """
    if isinstance(source, (str, Path)):
        lines = Path(source).read_text(encoding="utf-8").splitlines()
    else:
        lines = list(source)
    groups: dict[int, list[str]] = {}
    for line in lines:
        name = line.strip()
        if not name:
            continue
        stem = name.rsplit(".", 1)[0] if "." in name else name
        try:
            number = int(stem)
        except ValueError:
            raise GroundTruthError(f"image name {name!r} is not a group-numbered id") from None
        groups.setdefault(number // 100, []).append((number, stem))
    out = []
    for key in sorted(groups):
        members = sorted(groups[key])
        queries = [stem for number, stem in members if number % 100 == 0]
        if len(queries) != 1:
            raise GroundTruthError(f"image group {key} has {len(queries)} x00 query images, expected exactly 1")
        rest = [stem for number, stem in members if number % 100 != 0]
        if not rest:
            raise GroundTruthError(f"image group {key} has no database images besides the query")
        out.append(GroundTruth(queries[0], queries[0], None, frozenset(rest), junk=frozenset(queries)))
    return out


def compute_ap(ranked_ids: Iterable[str], positives, junk=frozenset()) -> float:
    """Trapezoidal average precision with junk entries skipped.

    Junk ids are removed from the ranking (ranks close up); every
    remaining row contributes the area of a precision-recall trapezoid,
    with precision taken as 1 ahead of the first row.  Returns 1.0 exactly
    when all positives precede all non-junk negatives.
    """
    positives = frozenset(positives)
    junk = frozenset(junk)
    if not positives:
        raise GroundTruthError("average precision needs at least one positive id")
    ap = 0.0
    hits = 0
    rank = 0
    old_recall = 0.0
    old_precision = 1.0
    for ident in ranked_ids:
        if ident in junk:
            continue
        if ident in positives:
            hits += 1
        rank += 1
        recall = hits / len(positives)
        precision = hits / rank
        ap += (recall - old_recall) * ((old_precision + precision) / 2.0)
        old_recall = recall
        old_precision = precision
    return ap


def average_precision(ranked: RankedList, gt: GroundTruth) -> float:
    """Score one ranking against one query's ground truth."""
    return compute_ap(ranked.ids(), gt.positives, gt.junk)


@dataclass(frozen=True)
class EvalReport:
    """Per-query average precisions, their mean, and the rankings behind them."""

    aps: dict
    mean_ap: float
    config: str = ""
    rankings: Optional[dict] = None


def evaluate(
    idx: Index,
    query_descriptors: Iterable[Descriptor],
    groundtruths: Iterable[GroundTruth],
    qe_m: Optional[int] = None,
    config_note: str = "",
) -> EvalReport:
    """Rank every query against the index and average the per-query APs.

    Query descriptors are matched to ground truth by id.  With ``qe_m``
    set, rankings come from query expansion with that many top results.
    """
    by_id = {}
    for d in query_descriptors:
        by_id[d.id] = d
    gts = sorted(groundtruths, key=lambda gt: gt.query_id)
    if not gts:
        raise DataError("nothing to evaluate: no ground truth given")
    missing = [gt.query_id for gt in gts if gt.query_id not in by_id]
    if missing:
        raise DataError(f"missing query descriptors: {', '.join(missing)}")
    aps = {}
    rankings = {}
    for gt in gts:
        d = by_id[gt.query_id]
        ranked = query_expand(idx, d, qe_m) if qe_m is not None else query(idx, d)
        rankings[gt.query_id] = ranked
        aps[gt.query_id] = average_precision(ranked, gt)
    mean_ap = sum(aps[gt.query_id] for gt in gts) / len(gts)
    return EvalReport(aps, mean_ap, config=config_note, rankings=rankings)


def write_report(report: EvalReport, sink: Union[str, Path]) -> None:
    """Write an evaluation report as JSON (APs rounded to 6 decimals)."""
    payload = {
        "mAP": round(report.mean_ap, 6),
        "queries": {qid: round(ap, 6) for qid, ap in sorted(report.aps.items())},
        "query_count": len(report.aps),
        "config": report.config,
    }
    Path(sink).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
