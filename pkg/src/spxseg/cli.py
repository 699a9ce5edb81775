"""Batch command-line front end.

Subcommands: ``segment`` (full pipeline on one image), ``oversegment``
(superpixels with an optional BR/UE sweep against ground truth),
``evaluate`` (metrics of a prediction against ground truth) and ``dataset``
(pipeline plus evaluation over a manifest).  Every run writes a
``run_config.json`` echoing all effective parameters next to its outputs.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import dataset_io, image_core, render
from .features import dump_features
from .labelmap import save_labelmap_png
from .merge_engine import write_history
from .metrics import DEFAULT_BOUNDARY_TOLERANCE, boundary_recall, evaluate, undersegmentation_error
from .oversegment import SlicParams, coslic_split, slic
from .pipeline import PipelineConfig, segment_array

log = logging.getLogger("spxseg")


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=600, help="superpixel count (default 600)")
    p.add_argument("--m", type=float, default=10.0, help="compactness weight (default 10)")
    p.add_argument("--slic-iters", type=int, default=10, help="clustering iteration cap")
    p.add_argument("--canny-sigma", type=float, default=image_core.DEFAULT_CANNY_SIGMA)
    p.add_argument("--canny-low", type=float, default=None, help="default: 0.66 * median L")
    p.add_argument("--canny-high", type=float, default=None, help="default: 1.33 * median L")


def _add_merge_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sigma", type=float, default=0.5, help="similarity kernel std-dev")
    p.add_argument("--s0", type=float, default=0.4, help="stopping similarity (default 0.4)")
    p.add_argument("--gamma-decay", type=float, default=0.95, help="barren-iteration decay")


def _config_from(args) -> PipelineConfig:
    cfg = PipelineConfig(
        k=args.k,
        m=args.m,
        max_iters=args.slic_iters,
        canny_sigma=args.canny_sigma,
        canny_low=args.canny_low,
        canny_high=args.canny_high,
        sigma=getattr(args, "sigma", 0.5),
        s0=getattr(args, "s0", 0.4),
        gamma_decay=getattr(args, "gamma_decay", 0.95),
    )
    cfg.validate()
    return cfg


def _write_run_config(out_dir: Path, args, config: PipelineConfig, extra=None) -> None:
    record = {"command": args.command, **config.to_dict()}
    if extra:
        record.update(extra)
    (out_dir / "run_config.json").write_text(json.dumps(record, indent=2) + "\n")


def _parse_sweep(text: str) -> list[int]:
    try:
        start, stop, step = (int(x) for x in text.split(":"))
    except ValueError as exc:
        raise ValueError(f"bad sweep {text!r}; expected START:STOP:STEP") from exc
    if start < 1 or stop < start or step < 1:
        raise ValueError(f"bad sweep {text!r}")
    return list(range(start, stop + 1, step))


def cmd_segment(args) -> int:
    config = _config_from(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rgb = image_core.load_image(args.image)

    on_snapshot = None
    if args.snapshots:
        snap_dir = out_dir / "snapshots"
        snap_dir.mkdir(exist_ok=True)

        def on_snapshot(iteration, lm):
            render.save_overlay_png(rgb, lm, snap_dir / f"iter_{iteration:04d}.png")

    out = segment_array(
        rgb,
        config,
        snapshot_every=args.snapshots or None,
        on_snapshot=on_snapshot,
        trace=args.trace,
    )

    save_labelmap_png(out.labelmap, out_dir / "labels.png")
    render.save_overlay_png(rgb, out.labelmap, out_dir / "overlay.png")
    write_history(out.merge.records, out_dir / "history.txt")
    render.save_progress_figure(out.merge.stats, out_dir / "progress.png")
    if args.dump_contours:
        image_core.save_contour_png(out.contours, out_dir / "contours.png")
    if args.dump_features:
        dump_features(out.features, out_dir / "features.jsonl")
    if args.trace:
        with open(out_dir / "trace.csv", "w", encoding="utf-8") as fh:
            fh.write("region_a,region_b,sim_c,sim_b,w_c,w_b,sim\n")
            for row in out.trace or ():
                fh.write(",".join(f"{v}" for v in row) + "\n")
    _write_run_config(out_dir, args, config, {"image": str(args.image)})
    log.info(
        "segmented %s: %d superpixels -> %d regions in %d iterations",
        args.image, out.superpixels.num_labels, out.labelmap.num_labels,
        out.merge.iterations,
    )
    return 0


def cmd_oversegment(args) -> int:
    config = _config_from(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rgb = image_core.load_image(args.image)
    lab = image_core.to_lab(rgb)
    contours = image_core.canny(
        rgb, low=config.canny_low, high=config.canny_high, sigma=config.canny_sigma
    )

    slic_map = slic(lab, config.slic_params())
    coslic_map = coslic_split(slic_map, contours, lab)
    save_labelmap_png(slic_map, out_dir / "slic_labels.png")
    save_labelmap_png(coslic_map, out_dir / "coslic_labels.png")
    render.save_overlay_png(rgb, slic_map, out_dir / "slic_overlay.png")
    render.save_overlay_png(rgb, coslic_map, out_dir / "coslic_overlay.png")

    extra = {}
    if args.gt:
        gts = dataset_io.load_ground_truth(args.gt)
        ks = _parse_sweep(args.k_sweep)
        rows = []
        for k in ks:
            params = SlicParams(k=k, m=config.m, max_iters=config.max_iters)
            s_map = slic(lab, params)
            c_map = coslic_split(s_map, contours, lab)
            br_s = float(np.mean([boundary_recall(s_map, g, args.delta) for g in gts.maps]))
            br_c = float(np.mean([boundary_recall(c_map, g, args.delta) for g in gts.maps]))
            ue_s = float(np.mean([undersegmentation_error(s_map, g) for g in gts.maps]))
            ue_c = float(np.mean([undersegmentation_error(c_map, g) for g in gts.maps]))
            rows.append((k, br_s, br_c, ue_s, ue_c))
        with open(out_dir / "sweep.csv", "w", encoding="utf-8") as fh:
            fh.write("k,br_slic,br_coslic,ue_slic,ue_coslic\n")
            for k, br_s, br_c, ue_s, ue_c in rows:
                fh.write(f"{k},{br_s:.6f},{br_c:.6f},{ue_s:.6f},{ue_c:.6f}\n")
        render.save_sweep_figure(rows, out_dir / "sweep.png")
        extra["k_sweep"] = args.k_sweep
        extra["delta"] = args.delta
    _write_run_config(out_dir, args, config, {"image": str(args.image), **extra})
    return 0


def cmd_evaluate(args) -> int:
    pred = dataset_io.parse_labelmap_png(args.pred)
    gts = dataset_io.load_ground_truth(args.gt)
    report = evaluate(pred, gts, delta=args.delta)
    print(json.dumps({"pred": str(args.pred), "delta": args.delta, **report.to_dict()}, indent=2))
    return 0


def cmd_dataset(args) -> int:
    config = _config_from(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = dataset_io.DatasetManifest.load(args.manifest)
    summary = dataset_io.run_dataset(manifest, config, delta=args.delta, workers=args.workers)
    dataset_io.write_per_image_csv(summary, out_dir / "per_image.csv")
    dataset_io.write_report_jsonl(summary, out_dir / "report.jsonl")
    table = dataset_io.format_summary_table(summary)
    (out_dir / "summary.txt").write_text(table)
    render.save_metrics_figure(summary, out_dir / "metrics.png")
    _write_run_config(
        out_dir, args, config,
        {"manifest": str(args.manifest), "delta": args.delta, "workers": args.workers},
    )
    print(table, end="")
    return 0 if summary.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spxseg",
        description="Superpixel region-growing image segmentation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="segment one image end to end")
    p.add_argument("image")
    p.add_argument("-o", "--out", required=True, help="output directory")
    _add_pipeline_flags(p)
    _add_merge_flags(p)
    p.add_argument("--snapshots", type=int, default=0, help="overlay PNG every N iterations")
    p.add_argument("--dump-contours", action="store_true")
    p.add_argument("--dump-features", action="store_true")
    p.add_argument("--trace", action="store_true", help="per-pair similarity trace CSV")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("oversegment", help="superpixels only, with optional BR/UE sweep")
    p.add_argument("image")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--gt", action="append", default=[], help="ground-truth path (repeatable)")
    p.add_argument("--k-sweep", default="100:1000:100", help="START:STOP:STEP (default 100:1000:100)")
    p.add_argument("--delta", type=int, default=DEFAULT_BOUNDARY_TOLERANCE)
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_oversegment)

    p = sub.add_parser("evaluate", help="metrics of a prediction against ground truth")
    p.add_argument("pred", help="16-bit label PNG")
    p.add_argument("--gt", action="append", required=True, help="ground-truth path (repeatable)")
    p.add_argument("--delta", type=int, default=DEFAULT_BOUNDARY_TOLERANCE)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("dataset", help="run and evaluate a whole manifest")
    p.add_argument("manifest")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--delta", type=int, default=DEFAULT_BOUNDARY_TOLERANCE)
    p.add_argument("--workers", type=int, default=1)
    _add_pipeline_flags(p)
    _add_merge_flags(p)
    p.set_defaults(func=cmd_dataset)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=logging.INFO if os.environ.get("SPXSEG_VERBOSE") else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
