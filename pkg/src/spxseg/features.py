"""Superpixel descriptors and region-level aggregation.

Each superpixel gets a 10-slot descriptor: per-channel Lab mean, variance and
skewness, per-channel 10-bin intensity histograms, four co-occurrence texture
statistics (contrast, correlation, energy, entropy) on the quantized L
channel, and 10-bin gradient orientation / magnitude histograms.

A region (a cluster of superpixels) carries two things: the ordered list of
its leaf descriptors (its multi-scale history) and a fixed-length pixel-
weighted aggregate used for region-to-region comparison.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .image_core import GradientField
from .labelmap import LabelMap

# Packed slot layout: 10 feature slots concatenated into one 63-float vector.
SLOT_NAMES = (
    "mean",
    "variance",
    "skewness",
    "intensity_hist",
    "contrast",
    "correlation",
    "energy",
    "entropy",
    "orientation_hist",
    "magnitude_hist",
)
SLOT_WIDTHS = (3, 3, 3, 30, 1, 1, 1, 1, 10, 10)
SLOT_STARTS = tuple(int(x) for x in np.cumsum((0,) + SLOT_WIDTHS[:-1]))
PACKED_LENGTH = sum(SLOT_WIDTHS)

GLCM_LEVELS = 16
HIST_BINS = 10
# fixed, image-independent histogram ranges so bins stay aligned across images
L_RANGE = (0.0, 100.0)
AB_RANGE = (-128.0, 127.0)
# theoretical ceiling of the Sobel response for an L channel in [0, 100]
MAX_SOBEL_RESPONSE = 400.0


@dataclass(frozen=True)
class FeatureVector:
    """10-slot descriptor of one superpixel, stored packed for fast math."""

    packed: np.ndarray

    def __post_init__(self):
        if self.packed.shape != (PACKED_LENGTH,):
            raise ValueError(f"packed descriptor must have length {PACKED_LENGTH}")

    def slot(self, name: str) -> np.ndarray:
        i = SLOT_NAMES.index(name)
        return self.packed[SLOT_STARTS[i] : SLOT_STARTS[i] + SLOT_WIDTHS[i]]

    @property
    def mean(self) -> np.ndarray:
        return self.slot("mean")

    @property
    def variance(self) -> np.ndarray:
        return self.slot("variance")

    @property
    def skewness(self) -> np.ndarray:
        return self.slot("skewness")

    @property
    def intensity_hist(self) -> np.ndarray:
        return self.slot("intensity_hist").reshape(3, HIST_BINS)

    @property
    def contrast(self) -> float:
        return float(self.slot("contrast")[0])

    @property
    def correlation(self) -> float:
        return float(self.slot("correlation")[0])

    @property
    def energy(self) -> float:
        return float(self.slot("energy")[0])

    @property
    def entropy(self) -> float:
        return float(self.slot("entropy")[0])

    @property
    def orientation_hist(self) -> np.ndarray:
        return self.slot("orientation_hist")

    @property
    def magnitude_hist(self) -> np.ndarray:
        return self.slot("magnitude_hist")


def extract_features(
    lab: np.ndarray, grad: GradientField, sp: LabelMap
) -> dict[int, FeatureVector]:
    """Compute the descriptor of every superpixel in one vectorized pass."""
    if lab.shape[:2] != sp.shape:
        raise ValueError("Lab image and label map dimensions differ")
    if grad.magnitude.shape != sp.shape:
        raise ValueError("gradient field and label map dimensions differ")

    labels = sp.labels.ravel()
    n = sp.num_labels
    counts = np.bincount(labels, minlength=n).astype(np.float64)
    if (counts == 0).any():
        raise ValueError("empty superpixel encountered")

    packed = np.zeros((n, PACKED_LENGTH))
    for c in range(3):
        ch = lab[..., c].ravel()
        mean = np.bincount(labels, weights=ch, minlength=n) / counts
        d = ch - mean[labels]
        var = np.bincount(labels, weights=d * d, minlength=n) / counts
        m3 = np.bincount(labels, weights=d * d * d, minlength=n) / counts
        skew = np.zeros(n)
        pos = var > 0
        skew[pos] = m3[pos] / var[pos] ** 1.5
        packed[:, c] = mean
        packed[:, 3 + c] = var
        packed[:, 6 + c] = skew

        lo, hi = L_RANGE if c == 0 else AB_RANGE
        bins = np.clip(((ch - lo) * (HIST_BINS / (hi - lo))).astype(np.int64), 0, HIST_BINS - 1)
        hist = np.bincount(labels * HIST_BINS + bins, minlength=n * HIST_BINS)
        packed[:, 9 + 10 * c : 19 + 10 * c] = hist.reshape(n, HIST_BINS) / counts[:, None]

    packed[:, 39:43] = _glcm_features(lab[..., 0], sp)

    ori_bins = np.clip(
        (grad.orientation.ravel() * (HIST_BINS / np.pi)).astype(np.int64), 0, HIST_BINS - 1
    )
    hist = np.bincount(labels * HIST_BINS + ori_bins, minlength=n * HIST_BINS)
    packed[:, 43:53] = hist.reshape(n, HIST_BINS) / counts[:, None]

    mag_bins = np.clip(
        (grad.magnitude.ravel() * (HIST_BINS / MAX_SOBEL_RESPONSE)).astype(np.int64),
        0,
        HIST_BINS - 1,
    )
    hist = np.bincount(labels * HIST_BINS + mag_bins, minlength=n * HIST_BINS)
    packed[:, 53:63] = hist.reshape(n, HIST_BINS) / counts[:, None]

    return {i: FeatureVector(packed[i].copy()) for i in range(n)}


def quantize_l(lum: np.ndarray) -> np.ndarray:
    """Quantize the L channel into the fixed co-occurrence gray levels."""
    return np.clip((lum * (GLCM_LEVELS / 100.0)).astype(np.int64), 0, GLCM_LEVELS - 1)


def _glcm_features(lum: np.ndarray, sp: LabelMap) -> np.ndarray:
    """Contrast, correlation, energy, entropy per superpixel.

    Symmetric distance-1 co-occurrences over the 4 axis directions,
    restricted to pixel pairs that both lie inside the superpixel.  A
    superpixel with no interior pair degenerates to the constant-patch values
    (contrast 0, correlation 0, energy 1, entropy 0).
    """
    labels = sp.labels
    n = sp.num_labels
    q = quantize_l(lum)
    cells = GLCM_LEVELS * GLCM_LEVELS

    keys = []
    for a_lbl, b_lbl, a_q, b_q in (
        (labels[:, :-1], labels[:, 1:], q[:, :-1], q[:, 1:]),
        (labels[:-1, :], labels[1:, :], q[:-1, :], q[1:, :]),
    ):
        same = a_lbl == b_lbl
        lbl = a_lbl[same].astype(np.int64)
        qa = a_q[same].astype(np.int64)
        qb = b_q[same].astype(np.int64)
        keys.append(lbl * cells + qa * GLCM_LEVELS + qb)
        keys.append(lbl * cells + qb * GLCM_LEVELS + qa)  # symmetric counterpart

    glcm = np.bincount(np.concatenate(keys), minlength=n * cells).astype(np.float64)
    glcm = glcm.reshape(n, GLCM_LEVELS, GLCM_LEVELS)
    totals = glcm.sum(axis=(1, 2))
    nonzero = totals > 0
    p = np.zeros_like(glcm)
    p[nonzero] = glcm[nonzero] / totals[nonzero, None, None]

    levels = np.arange(GLCM_LEVELS, dtype=np.float64)
    diff2 = (levels[:, None] - levels[None, :]) ** 2
    contrast = np.einsum("nij,ij->n", p, diff2)
    marg = p.sum(axis=2)  # symmetric: row marginal == column marginal
    mu = marg @ levels
    var = marg @ (levels**2) - mu**2
    cross = np.einsum("nij,i,j->n", p, levels, levels)
    correlation = np.zeros(n)
    okvar = var > 1e-12
    correlation[okvar] = (cross[okvar] - mu[okvar] ** 2) / var[okvar]
    energy = (p**2).sum(axis=(1, 2))
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(p > 0, np.log2(p, where=p > 0), 0.0)
    entropy = -(p * logs).sum(axis=(1, 2))

    out = np.stack([contrast, correlation, energy, entropy], axis=1)
    out[~nonzero] = (0.0, 0.0, 1.0, 0.0)
    return out


@dataclass(frozen=True)
class MultiScaleDescriptor:
    """Ordered leaf descriptors of a region, in merge-history order."""

    entries: tuple[tuple[int, FeatureVector], ...]

    @classmethod
    def leaf(cls, sp_id: int, fv: FeatureVector) -> "MultiScaleDescriptor":
        return cls(((sp_id, fv),))

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(sp_id for sp_id, _ in self.entries)

    def __len__(self) -> int:
        return len(self.entries)


def merge_descriptor(a: MultiScaleDescriptor, b: MultiScaleDescriptor) -> MultiScaleDescriptor:
    """Concatenate two regions' descriptor lists; their leaf sets must be disjoint."""
    overlap = set(a.ids) & set(b.ids)
    if overlap:
        raise ValueError(f"descriptors share superpixels {sorted(overlap)}")
    return MultiScaleDescriptor(a.entries + b.entries)


@dataclass(frozen=True)
class RegionAggregate:
    """Pixel-weighted aggregate descriptor of a region.

    Every slot is the pixel-count-weighted mean of the member superpixels'
    slots; for the histogram slots this is exactly the renormalized weighted
    sum, so histogram mass stays 1.  The aggregate of a single superpixel is
    its descriptor unchanged.
    """

    features: FeatureVector
    pixel_area: int

    @classmethod
    def from_leaf(cls, fv: FeatureVector, pixel_area: int) -> "RegionAggregate":
        if pixel_area < 1:
            raise ValueError("pixel_area must be positive")
        return cls(FeatureVector(fv.packed.copy()), int(pixel_area))


def merge_aggregates(a: RegionAggregate, b: RegionAggregate) -> RegionAggregate:
    total = a.pixel_area + b.pixel_area
    packed = (a.pixel_area * a.features.packed + b.pixel_area * b.features.packed) / total
    return RegionAggregate(FeatureVector(packed), total)


def aggregate_from_descriptor(
    desc: MultiScaleDescriptor, areas: Mapping[int, int]
) -> RegionAggregate:
    """One-shot aggregate over all leaves; matches incremental merging to 1e-9."""
    weights = np.array([areas[sp_id] for sp_id, _ in desc.entries], dtype=np.float64)
    stack = np.stack([fv.packed for _, fv in desc.entries])
    packed = (weights[:, None] * stack).sum(axis=0) / weights.sum()
    return RegionAggregate(FeatureVector(packed), int(weights.sum()))


def dump_features(features: Mapping[int, FeatureVector], path) -> None:
    """Debug dump: one JSON record per superpixel with the 10 named slots."""
    with open(path, "w", encoding="utf-8") as fh:
        for sp_id in sorted(features):
            fv = features[sp_id]
            record: dict[str, object] = {"id": sp_id}
            for name in SLOT_NAMES:
                values = fv.slot(name)
                record[name] = values.item() if values.size == 1 else values.tolist()
            fh.write(json.dumps(record) + "\n")
