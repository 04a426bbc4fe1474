"""Command-line front end over the library.

Four subcommands mirror the library workflow: ``aggregate`` turns a tensor
corpus into a descriptor file, ``fit-whitening`` learns a whitening model
from normalized descriptors, ``search`` ranks an index against query
descriptors, and ``evaluate`` scores rankings against ground truth.

Aggregation is configured with a preset plus optional overrides, or with a
flat ``key = value`` config file using the same keys as ``PipelineConfig``
(nested fields spelled ``pooling.kind``, ``spatial_norm.order``, ...).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .aggregation import (
    NORMALIZED,
    preset,
    read_descriptors,
    run_pipeline,
    write_descriptors,
)
from .errors import CrowError, ParameterError
from .evaluator import evaluate, parse_groundtruth, parse_holidays, write_report
from .search import build_index, query, query_expand
from .tensor import PoolingSpec, iter_corpus
from .weighting import SpatialNormSpec
from .whitening import fit_whitening, read_model, write_model

_CONFIG_FLOAT = {"epsilon", "sigma_fraction", "power", "spatial_norm.power"}
_CONFIG_INT = {"output_dim", "pooling.window_w", "pooling.window_h", "pooling.stride"}
_CONFIG_STR = {"spatial", "channel", "norm_order", "final_norm_order", "spatial_norm.order", "pooling.kind"}


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines (# comments and blank lines ignored)."""
    entries = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        if "=" not in text:
            raise ParameterError(f"{path}:{lineno}: expected key = value, got {line!r}")
        key, _, value = text.partition("=")
        entries[key.strip()] = value.strip().strip('"')
    return entries


def build_config(entries: dict):
    """Turn a flat key/value mapping into a PipelineConfig.

    Starts from the named preset ("crow" unless stated) and source layer,
    then applies per-field overrides.
    """
    entries = dict(entries)
    cfg = preset(entries.pop("preset", "crow"), entries.pop("layer", "pool5"))
    overrides = {}
    pooling = {}
    spatial_norm = {}
    for key, raw in entries.items():
        try:
            if key in _CONFIG_FLOAT:
                value = float(raw)
            elif key in _CONFIG_INT:
                value = int(raw)
            elif key in _CONFIG_STR:
                value = raw
            else:
                raise ParameterError(f"unknown config key {key!r}")
        except ValueError:
            raise ParameterError(f"config key {key!r}: cannot parse {raw!r}") from None
        group, _, field = key.partition(".")
        if group == "pooling":
            pooling[field] = value
        elif group == "spatial_norm":
            spatial_norm[field] = value
        else:
            overrides[key] = value
    if pooling:
        base = cfg.pooling
        overrides["pooling"] = PoolingSpec(
            window_w=pooling.get("window_w", base.window_w),
            window_h=pooling.get("window_h", base.window_h),
            stride=pooling.get("stride", base.stride),
            kind=pooling.get("kind", base.kind),
        )
    if spatial_norm:
        base = cfg.spatial_norm
        overrides["spatial_norm"] = SpatialNormSpec(
            order=spatial_norm.get("order", base.order),
            power=spatial_norm.get("power", base.power),
        )
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _cmd_aggregate(args) -> int:
    entries = read_config_file(args.config) if args.config else {}
    if args.preset:
        entries["preset"] = args.preset
    if args.layer:
        entries["layer"] = args.layer
    cfg = build_config(entries)
    model = read_model(args.whitening) if args.whitening else None
    descriptors = [run_pipeline(t, cfg, model) for t in iter_corpus(args.tensors)]
    write_descriptors(descriptors, args.out)
    if descriptors:
        print(f"wrote {len(descriptors)} descriptors (dim {descriptors[0].dim}, "
              f"stage {descriptors[0].stage}) to {args.out}")
    else:
        print(f"wrote 0 descriptors to {args.out}")
    return 0


def _cmd_fit_whitening(args) -> int:
    descriptors = read_descriptors(args.descriptors, stage=NORMALIZED)
    model = fit_whitening(descriptors, args.dim, delta=args.delta, config_tag=args.tag)
    write_model(model, args.out)
    print(f"fitted whitening {model.input_dim} -> {model.output_dim} "
          f"from {len(descriptors)} descriptors; wrote {args.out}")
    return 0


def _cmd_search(args) -> int:
    idx = build_index(read_descriptors(args.index))
    lines = []
    for q in read_descriptors(args.query):
        if args.qe is not None:
            ranked = query_expand(idx, q, args.qe)
            items = ranked.items[: args.top] if args.top is not None else ranked.items
        else:
            items = query(idx, q, top_n=args.top).items
        lines.append(f"# query: {q.id}")
        for rank, (ident, score) in enumerate(items, 1):
            lines.append(f"{rank}\t{ident}\t{score:.6f}")
    text = "\n".join(lines) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")
    return 0


def _cmd_evaluate(args) -> int:
    idx = build_index(read_descriptors(args.index))
    queries = read_descriptors(args.queries)
    gts = parse_groundtruth(args.gt) if args.format == "oxford" else parse_holidays(args.gt)
    note = f"format={args.format} qe={'off' if args.qe is None else args.qe}"
    report = evaluate(idx, queries, gts, qe_m=args.qe, config_note=note)
    write_report(report, args.report)
    print(f"mAP: {report.mean_ap:.6f} over {len(report.aps)} queries -> {args.report}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crow", description="Weighted aggregation of activation tensors for image retrieval.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("aggregate", help="turn a tensor corpus into a descriptor file")
    p.add_argument("--tensors", required=True, help="directory of .crowt files (manifest.tsv honored)")
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--preset", choices=("crow", "ucrow", "spoc"), help="named configuration (default crow)")
    p.add_argument("--layer", choices=("pool5", "conv5_3"), help="source layer the tensors came from (default pool5)")
    p.add_argument("--whitening", help="whitening model (.croww); output becomes final-stage")
    p.add_argument("--out", required=True, help="output descriptor file (.crowd)")
    p.set_defaults(func=_cmd_aggregate)

    p = sub.add_parser("fit-whitening", help="learn a whitening model from normalized descriptors")
    p.add_argument("--descriptors", required=True, help="normalized-stage descriptor file (.crowd)")
    p.add_argument("--dim", required=True, type=int, help="output dimensionality")
    p.add_argument("--out", required=True, help="output model file (.croww)")
    p.add_argument("--delta", type=float, help="eigenvalue floor (default: 1e-9 x largest eigenvalue)")
    p.add_argument("--tag", default="", help="free-text note mixed into the model fingerprint")
    p.set_defaults(func=_cmd_fit_whitening)

    p = sub.add_parser("search", help="rank an index against query descriptors")
    p.add_argument("--index", required=True, help="descriptor file to search in")
    p.add_argument("--query", required=True, help="descriptor file of queries")
    p.add_argument("--qe", type=int, help="expand each query with its top M results")
    p.add_argument("--top", type=int, help="emit only the best N rows per query")
    p.add_argument("--out", required=True, help="output TSV (rank, id, score); '-' for stdout")
    p.set_defaults(func=_cmd_search)

    p = sub.add_parser("evaluate", help="score rankings against ground truth")
    p.add_argument("--index", required=True, help="descriptor file to search in")
    p.add_argument("--queries", required=True, help="descriptor file of queries")
    p.add_argument("--gt", required=True, help="ground-truth directory (or image list for --format holidays)")
    p.add_argument("--qe", type=int, help="expand each query with its top M results")
    p.add_argument("--format", choices=("oxford", "holidays"), default="oxford", help="ground-truth layout")
    p.add_argument("--report", required=True, help="output JSON report path")
    p.set_defaults(func=_cmd_evaluate)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CrowError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
