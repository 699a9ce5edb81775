"""End-to-end segmentation pipeline.

Wires the stages together: Lab conversion -> Canny contours -> superpixels ->
contour splitting -> descriptors -> region merging.  Both the CLI and the
dataset runner go through here so a configuration means the same thing
everywhere.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from . import image_core
from .features import FeatureVector, extract_features
from .labelmap import LabelMap
from .merge_engine import MergeResult, init_state, run
from .oversegment import SlicParams, coslic_split, slic
from .similarity import SimilarityParams


@dataclass(frozen=True)
class PipelineConfig:
    """Every tunable of the pipeline, with its default."""

    k: int = 600
    m: float = 10.0
    max_iters: int = 10
    canny_sigma: float = image_core.DEFAULT_CANNY_SIGMA
    canny_low: float | None = None
    canny_high: float | None = None
    sigma: float = 0.5
    s0: float = 0.4
    gamma_decay: float = 0.95

    def validate(self) -> None:
        self.slic_params().validate()
        self.similarity_params().validate()
        if self.canny_sigma <= 0:
            raise ValueError(f"canny_sigma must be positive, got {self.canny_sigma}")
        if self.canny_low is not None and self.canny_high is not None:
            if not (0 <= self.canny_low <= self.canny_high):
                raise ValueError("canny thresholds must satisfy 0 <= low <= high")
        if not (0 < self.s0 <= 1):
            raise ValueError(f"s0 must lie in (0, 1], got {self.s0}")
        if not (0 < self.gamma_decay < 1):
            raise ValueError(f"gamma_decay must lie in (0, 1), got {self.gamma_decay}")

    def slic_params(self) -> SlicParams:
        return SlicParams(k=self.k, m=self.m, max_iters=self.max_iters)

    def similarity_params(self) -> SimilarityParams:
        return SimilarityParams(sigma=self.sigma)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SegmentationOutput:
    labelmap: LabelMap
    superpixels: LabelMap
    slic_superpixels: LabelMap
    contours: np.ndarray
    merge: MergeResult
    features: dict[int, FeatureVector]
    trace: tuple[tuple, ...] | None = None


def segment_array(
    rgb: np.ndarray,
    config: PipelineConfig | None = None,
    snapshot_every: int | None = None,
    on_snapshot: Callable[[int, LabelMap], None] | None = None,
    trace: bool = False,
) -> SegmentationOutput:
    """Segment an in-memory sRGB image."""
    config = config or PipelineConfig()
    config.validate()

    lab = image_core.to_lab(rgb)
    contours = image_core.canny(
        rgb, low=config.canny_low, high=config.canny_high, sigma=config.canny_sigma
    )
    slic_map = slic(lab, config.slic_params())
    superpixels = coslic_split(slic_map, contours, lab)
    grad = image_core.gradient_field(lab)
    features = extract_features(lab, grad, superpixels)
    state = init_state(
        superpixels,
        features,
        contours,
        s0=config.s0,
        params=config.similarity_params(),
        gamma_decay=config.gamma_decay,
        trace=trace,
    )
    merge = run(state, snapshot_every=snapshot_every, on_snapshot=on_snapshot)
    return SegmentationOutput(
        labelmap=merge.labelmap,
        superpixels=superpixels,
        slic_superpixels=slic_map,
        contours=contours,
        merge=merge,
        features=features,
        trace=tuple(state.trace) if state.trace is not None else None,
    )


def segment_image(path, config: PipelineConfig | None = None, **kwargs) -> SegmentationOutput:
    """Segment an image file (PNG or PPM)."""
    return segment_array(image_core.load_image(path), config, **kwargs)
