"""Ground-truth ingestion and dataset-run orchestration.

Ground truth arrives either as the plain-text ``.seg`` run-length format
(header lines, then ``label row col_start col_end`` rows with inclusive
column ranges) or as 16-bit label PNGs.  A manifest lists one image per line
with its ground-truth paths:

    image_path<TAB>gt_path[,gt_path...]
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .labelmap import LabelMap, load_labelmap_png
from .metrics import DEFAULT_BOUNDARY_TOLERANCE, GroundTruth, MetricsReport, evaluate
from .pipeline import PipelineConfig, segment_image

SUMMARY_COLUMNS = (
    "image",
    "br",
    "ue",
    "pri",
    "voi",
    "bde",
    "gce",
    "regions",
    "iterations",
    "wall_time_ms",
)


def parse_seg(path) -> LabelMap:
    """Parse a ``.seg`` run-length annotation into a label map.

    The runs must tile the image exactly once; anything else (missing rows,
    overlaps, out-of-range coordinates, broken header) is an error.  Label
    ids are densified but the grouping is preserved exactly.
    """
    width = height = None
    data_started = False
    runs: list[tuple[int, int, int, int]] = []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if data_started:
                parts = line.split()
                if len(parts) != 4:
                    raise ValueError(f"{path}:{lineno}: malformed data row {line!r}")
                try:
                    runs.append(tuple(int(p) for p in parts))  # type: ignore[arg-type]
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: non-integer data row {line!r}") from exc
            elif line == "data":
                data_started = True
            else:
                parts = line.split(maxsplit=1)
                key = parts[0]
                value = parts[1] if len(parts) > 1 else ""
                if key == "width":
                    width = int(value)
                elif key == "height":
                    height = int(value)
    if not data_started:
        raise ValueError(f"{path}: missing 'data' section")
    if width is None or height is None or width < 1 or height < 1:
        raise ValueError(f"{path}: malformed header (width/height missing)")

    labels = np.full((height, width), -1, dtype=np.int64)
    for seg_id, row, c1, c2 in runs:
        if seg_id < 0 or not (0 <= row < height) or not (0 <= c1 <= c2 < width):
            raise ValueError(
                f"{path}: run ({seg_id}, {row}, {c1}, {c2}) out of range for {width}x{height}"
            )
        target = labels[row, c1 : c2 + 1]
        if (target >= 0).any():
            raise ValueError(f"{path}: overlapping runs at row {row}, cols {c1}..{c2}")
        target[...] = seg_id
    if (labels < 0).any():
        n_missing = int((labels < 0).sum())
        raise ValueError(f"{path}: {n_missing} pixels not covered by any run")

    uniq, inverse = np.unique(labels, return_inverse=True)
    return LabelMap(inverse.reshape(height, width).astype(np.int32), int(uniq.size))


def parse_labelmap_png(path) -> LabelMap:
    """Read a 16-bit label PNG as ground truth (connectivity not required)."""
    arr = load_labelmap_png(path)
    uniq, inverse = np.unique(arr, return_inverse=True)
    return LabelMap(inverse.reshape(arr.shape).astype(np.int32), int(uniq.size))


def load_ground_truth(paths) -> GroundTruth:
    maps = []
    for p in paths:
        p = Path(p)
        if p.suffix == ".seg":
            maps.append(parse_seg(p))
        elif p.suffix == ".png":
            maps.append(parse_labelmap_png(p))
        else:
            raise ValueError(f"{p}: unsupported ground-truth format (need .seg or .png)")
    return GroundTruth(tuple(maps))


@dataclass(frozen=True)
class DatasetManifest:
    """Images with their ground-truth annotation paths."""

    entries: tuple[tuple[str, tuple[str, ...]], ...]

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        base = Path(path).parent
        entries = []
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise ValueError(f"{path}:{lineno}: expected 'image<TAB>gt[,gt...]'")
                image = str((base / parts[0]).resolve() if not Path(parts[0]).is_absolute() else parts[0])
                gts = tuple(
                    str((base / g).resolve() if not Path(g).is_absolute() else g)
                    for g in parts[1].split(",")
                    if g
                )
                if not gts:
                    raise ValueError(f"{path}:{lineno}: image has no ground truth")
                entries.append((image, gts))
        if not entries:
            raise ValueError(f"{path}: empty manifest")
        manifest = cls(tuple(entries))
        manifest.check_paths()
        return manifest

    def check_paths(self) -> None:
        for image, gts in self.entries:
            if not Path(image).exists():
                raise FileNotFoundError(f"manifest image not found: {image}")
            for g in gts:
                if not Path(g).exists():
                    raise FileNotFoundError(f"manifest ground truth not found: {g}")


@dataclass(frozen=True)
class ImageResult:
    image: str
    report: MetricsReport | None
    regions: int
    iterations: int
    wall_time_ms: float
    error: str | None = None


@dataclass(frozen=True)
class DatasetSummary:
    results: tuple[ImageResult, ...]
    config: PipelineConfig

    @property
    def ok(self) -> tuple[ImageResult, ...]:
        return tuple(r for r in self.results if r.error is None)

    @property
    def failures(self) -> tuple[ImageResult, ...]:
        return tuple(r for r in self.results if r.error is not None)

    def means(self) -> dict[str, float]:
        ok = self.ok
        if not ok:
            return {}
        return {
            name: float(np.mean([getattr(r.report, name) for r in ok]))
            for name in ("br", "ue", "pri", "voi", "bde", "gce")
        }


def _process_entry(args) -> ImageResult:
    image, gt_paths, config, delta = args
    start = time.perf_counter()
    try:
        gts = load_ground_truth(gt_paths)
        out = segment_image(image, config)
        report = evaluate(out.labelmap, gts, delta=delta)
        elapsed = (time.perf_counter() - start) * 1000.0
        return ImageResult(
            image=image,
            report=report,
            regions=out.labelmap.num_labels,
            iterations=out.merge.iterations,
            wall_time_ms=elapsed,
        )
    except Exception as exc:  # per-image failures never abort the run
        elapsed = (time.perf_counter() - start) * 1000.0
        return ImageResult(image, None, 0, 0, elapsed, error=f"{type(exc).__name__}: {exc}")


def run_dataset(
    manifest: DatasetManifest,
    config: PipelineConfig | None = None,
    delta: int = DEFAULT_BOUNDARY_TOLERANCE,
    workers: int = 1,
) -> DatasetSummary:
    """Segment and evaluate every manifest entry.

    Entries are independent; with ``workers > 1`` they run in a bounded
    process pool.  Results keep manifest order either way.
    """
    config = config or PipelineConfig()
    config.validate()
    jobs = [(img, gts, config, delta) for img, gts in manifest.entries]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_process_entry, jobs))
    else:
        results = [_process_entry(job) for job in jobs]
    return DatasetSummary(tuple(results), config)


def write_per_image_csv(summary: DatasetSummary, path) -> None:
    """Per-image CSV: image, the six metrics, region/iteration counts, wall time."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        for r in summary.results:
            if r.error is not None:
                continue
            rep = r.report
            fh.write(
                f"{r.image},{rep.br:.6f},{rep.ue:.6f},{rep.pri:.6f},"
                f"{rep.voi:.6f},{rep.bde:.6f},{rep.gce:.6f},"
                f"{r.regions},{r.iterations},{r.wall_time_ms:.1f}\n"
            )


def write_report_jsonl(summary: DatasetSummary, path) -> None:
    """One JSON record per image with per-annotation and averaged metrics."""
    import json

    with open(path, "w", encoding="utf-8") as fh:
        for r in summary.results:
            record: dict[str, object] = {"image": r.image}
            if r.error is not None:
                record["error"] = r.error
            else:
                record.update(r.report.to_dict())
                record["regions"] = r.regions
                record["iterations"] = r.iterations
            fh.write(json.dumps(record) + "\n")


def format_summary_table(summary: DatasetSummary) -> str:
    """Dataset-level mean table over the final-segmentation metrics."""
    means = summary.means()
    lines = [
        f"images evaluated: {len(summary.ok)}  failed: {len(summary.failures)}",
        f"{'':12s} {'PRI ^':>8s} {'VoI v':>8s} {'BDE v':>8s} {'GCE v':>8s}",
    ]
    if means:
        lines.append(
            f"{'mean':12s} {means['pri']:8.4f} {means['voi']:8.4f} "
            f"{means['bde']:8.4f} {means['gce']:8.4f}"
        )
        lines.append(f"{'mean BR':12s} {means['br']:8.4f}")
        lines.append(f"{'mean UE':12s} {means['ue']:8.4f}")
    for r in summary.failures:
        lines.append(f"FAILED {r.image}: {r.error}")
    return "\n".join(lines) + "\n"
