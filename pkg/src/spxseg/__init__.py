"""Superpixel region-growing image segmentation.

Pipeline: sRGB image -> CIE Lab -> Canny global contours -> compact
superpixels -> contour-constrained splitting -> 10-slot region descriptors ->
adaptive mutual-selection merging -> final segmentation, plus a six-metric
evaluation suite against ground-truth annotations.
"""

from .image_core import GradientField, canny, gradient_field, load_image, to_lab
from .labelmap import LabelMap, boundary_mask, relabel_compact
from .merge_engine import MergeResult, init_state, run
from .metrics import GroundTruth, MetricsReport, evaluate
from .oversegment import SlicParams, coslic_split, slic
from .pipeline import PipelineConfig, SegmentationOutput, segment_array, segment_image
from .similarity import SimilarityParams, chi2, content_similarity, membership

__version__ = "0.1.0"

__all__ = [
    "GradientField",
    "GroundTruth",
    "LabelMap",
    "MergeResult",
    "MetricsReport",
    "PipelineConfig",
    "SegmentationOutput",
    "SimilarityParams",
    "SlicParams",
    "boundary_mask",
    "canny",
    "chi2",
    "content_similarity",
    "coslic_split",
    "evaluate",
    "gradient_field",
    "init_state",
    "load_image",
    "membership",
    "relabel_compact",
    "run",
    "segment_array",
    "segment_image",
    "slic",
    "to_lab",
]
