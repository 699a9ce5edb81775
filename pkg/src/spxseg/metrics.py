"""Segmentation quality metrics.

Boundary recall and under-segmentation error judge over-segmentations;
probabilistic Rand index, variation of information, boundary displacement
error and global consistency error judge final segmentations.  When several
ground-truth annotations exist, every metric is computed against each
annotation separately and arithmetically averaged.

All label-pair statistics are computed from contingency tables, never by
explicit pixel-pair enumeration, so full-size images stay cheap.  Boundary
pixels follow the single-sided convention of :func:`spxseg.labelmap.boundary_mask`
(the image border is not a boundary).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from .labelmap import LabelMap, boundary_mask

__all__ = [
    "GroundTruth",
    "MetricsReport",
    "boundary_recall",
    "undersegmentation_error",
    "probabilistic_rand_index",
    "variation_of_information",
    "boundary_displacement_error",
    "global_consistency_error",
    "evaluate",
]

DEFAULT_BOUNDARY_TOLERANCE = 2  # pixels


@dataclass(frozen=True)
class GroundTruth:
    """One or more human annotations of the same image."""

    maps: tuple[LabelMap, ...]

    def __post_init__(self):
        if not self.maps:
            raise ValueError("ground truth needs at least one annotation")
        shape = self.maps[0].shape
        for lm in self.maps[1:]:
            if lm.shape != shape:
                raise ValueError("ground-truth annotations have differing dimensions")

    @property
    def shape(self) -> tuple[int, int]:
        return self.maps[0].shape


def _as_ground_truth(gts: GroundTruth | Sequence[LabelMap] | LabelMap) -> GroundTruth:
    if isinstance(gts, GroundTruth):
        return gts
    if isinstance(gts, LabelMap):
        return GroundTruth((gts,))
    return GroundTruth(tuple(gts))


def _check_dims(pred: LabelMap, gt: LabelMap) -> None:
    if pred.shape != gt.shape:
        raise ValueError(f"dimension mismatch: {pred.shape} vs {gt.shape}")


def _contingency(a: np.ndarray, b: np.ndarray, na: int, nb: int) -> np.ndarray:
    return np.bincount(
        a.ravel().astype(np.int64) * nb + b.ravel(), minlength=na * nb
    ).reshape(na, nb)


def boundary_recall(pred: LabelMap, gt: LabelMap, delta: int = DEFAULT_BOUNDARY_TOLERANCE) -> float:
    """Fraction of ground-truth boundary pixels with a predicted boundary
    pixel within Chebyshev distance ``delta``.

    A ground truth without boundaries (single region) scores 1 by definition.
    """
    _check_dims(pred, gt)
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    gt_b = boundary_mask(gt.labels)
    total = int(gt_b.sum())
    if total == 0:
        return 1.0
    pred_b = boundary_mask(pred.labels)
    if delta > 0:
        pred_b = ndimage.binary_dilation(
            pred_b, structure=np.ones((3, 3), dtype=bool), iterations=delta
        )
    return float((gt_b & pred_b).sum() / total)


def undersegmentation_error(pred: LabelMap, gt: LabelMap) -> float:
    """Pixel leakage of predicted regions across ground-truth borders.

    (1/N) * sum over gt segments S, over predicted regions P overlapping S,
    of min(|P inside S|, |P outside S|).  Zero iff the prediction refines the
    ground truth.
    """
    _check_dims(pred, gt)
    m = _contingency(pred.labels, gt.labels, pred.num_labels, gt.num_labels)
    p_sizes = m.sum(axis=1)
    inside = m
    outside = p_sizes[:, None] - m
    leak = np.minimum(inside, outside)
    return float(leak[m > 0].sum() / pred.size)


def _rand_index(pred: LabelMap, gt: LabelMap) -> float:
    """Fraction of unordered pixel pairs whose grouping agrees."""
    _check_dims(pred, gt)
    n = pred.size
    pairs_total = n * (n - 1) // 2
    if pairs_total == 0:
        return 1.0
    m = _contingency(pred.labels, gt.labels, pred.num_labels, gt.num_labels)

    def _c2(x: np.ndarray) -> int:
        x = x.astype(np.int64)
        return int((x * (x - 1) // 2).sum())

    same_pred = _c2(m.sum(axis=1))
    same_gt = _c2(m.sum(axis=0))
    same_both = _c2(m)
    disagreements = same_pred + same_gt - 2 * same_both
    return float((pairs_total - disagreements) / pairs_total)


def probabilistic_rand_index(pred: LabelMap, gts: GroundTruth | Sequence[LabelMap]) -> float:
    """Rand index against each annotation, averaged."""
    gt = _as_ground_truth(gts)
    return float(np.mean([_rand_index(pred, g) for g in gt.maps]))


def variation_of_information(pred: LabelMap, gt: LabelMap) -> float:
    """H(pred | gt) + H(gt | pred) in bits, from the joint label distribution.

    Zero iff the two partitions agree up to relabeling; symmetric.
    """
    _check_dims(pred, gt)
    m = _contingency(pred.labels, gt.labels, pred.num_labels, gt.num_labels)
    p = m / pred.size

    def _entropy(dist: np.ndarray) -> float:
        nz = dist[dist > 0]
        return float(-(nz * np.log2(nz)).sum())

    h_joint = _entropy(p.ravel())
    h_pred = _entropy(p.sum(axis=1))
    h_gt = _entropy(p.sum(axis=0))
    return max(0.0, 2.0 * h_joint - h_pred - h_gt)


def boundary_displacement_error(pred: LabelMap, gt: LabelMap) -> float:
    """Symmetric mean distance between the two boundary sets.

    Half of (mean distance from each predicted boundary pixel to the nearest
    ground-truth boundary pixel, plus the reverse), via distance transforms.
    Zero when either map has no boundary, by convention.
    """
    _check_dims(pred, gt)
    pred_b = boundary_mask(pred.labels)
    gt_b = boundary_mask(gt.labels)
    if not pred_b.any() or not gt_b.any():
        return 0.0
    dist_to_gt = ndimage.distance_transform_edt(~gt_b)
    dist_to_pred = ndimage.distance_transform_edt(~pred_b)
    return float(0.5 * (dist_to_gt[pred_b].mean() + dist_to_pred[gt_b].mean()))


def global_consistency_error(pred: LabelMap, gt: LabelMap) -> float:
    """Refinement error, taking the laxer of the two directions.

    With per-pixel error E(s1, s2, p) = |R(s1,p) \\ R(s2,p)| / |R(s1,p)|,
    GCE = (1/N) * min(sum_p E(pred, gt, p), sum_p E(gt, pred, p)).
    """
    _check_dims(pred, gt)
    m = _contingency(pred.labels, gt.labels, pred.num_labels, gt.num_labels).astype(np.float64)
    p_sizes = m.sum(axis=1)
    g_sizes = m.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        e_pred = np.where(m > 0, m * (p_sizes[:, None] - m) / p_sizes[:, None], 0.0).sum()
        e_gt = np.where(m > 0, m * (g_sizes[None, :] - m) / g_sizes[None, :], 0.0).sum()
    return float(min(e_pred, e_gt) / pred.size)


@dataclass(frozen=True)
class PerAnnotationMetrics:
    br: float
    ue: float
    pri: float
    voi: float
    bde: float
    gce: float


@dataclass(frozen=True)
class MetricsReport:
    """Per-annotation metrics and their arithmetic means."""

    br: float
    ue: float
    pri: float
    voi: float
    bde: float
    gce: float
    per_gt: tuple[PerAnnotationMetrics, ...]

    def to_dict(self) -> dict:
        return {
            "br": self.br,
            "ue": self.ue,
            "pri": self.pri,
            "voi": self.voi,
            "bde": self.bde,
            "gce": self.gce,
            "per_gt": [
                {
                    "br": g.br,
                    "ue": g.ue,
                    "pri": g.pri,
                    "voi": g.voi,
                    "bde": g.bde,
                    "gce": g.gce,
                }
                for g in self.per_gt
            ],
        }


def evaluate(
    pred: LabelMap,
    gts: GroundTruth | Sequence[LabelMap] | LabelMap,
    delta: int = DEFAULT_BOUNDARY_TOLERANCE,
) -> MetricsReport:
    """All six metrics against every annotation, plus their means."""
    gt = _as_ground_truth(gts)
    if pred.shape != gt.shape:
        raise ValueError(f"dimension mismatch: {pred.shape} vs {gt.shape}")
    per = tuple(
        PerAnnotationMetrics(
            br=boundary_recall(pred, g, delta),
            ue=undersegmentation_error(pred, g),
            pri=_rand_index(pred, g),
            voi=variation_of_information(pred, g),
            bde=boundary_displacement_error(pred, g),
            gce=global_consistency_error(pred, g),
        )
        for g in gt.maps
    )
    return MetricsReport(
        br=float(np.mean([g.br for g in per])),
        ue=float(np.mean([g.ue for g in per])),
        pri=float(np.mean([g.pri for g in per])),
        voi=float(np.mean([g.voi for g in per])),
        bde=float(np.mean([g.bde for g in per])),
        gce=float(np.mean([g.gce for g in per])),
        per_gt=per,
    )
