"""Region similarity: chi-square feature distances mapped through a Gaussian
kernel, summarized by four statistics, and combined with a border term.

For two regions, each of the 10 descriptor slots yields an intermediate
similarity S_l = exp(-0.5 * (chi2_l / sigma)^2) in (0, 1].  The content
similarity is (S_max + S_min + S_mean + S_var) / 4; because the variance term
is included, a region compared against itself scores exactly 0.75, and the
value can never exceed 0.8125.  The border similarity is the mean content
similarity of the superpixel couples along the regions' shared border, and
the combined score weights the two terms by relative region size and shared
border fraction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

from .features import PACKED_LENGTH, SLOT_STARTS, FeatureVector, RegionAggregate

__all__ = [
    "SimilarityParams",
    "chi2",
    "membership",
    "feature_similarities",
    "content_similarity",
    "border_similarity",
    "content_weight",
    "border_weight",
    "combine",
    "CONTENT_SIMILARITY_MAX",
]

# Independent bound on the four-statistic average: each statistic is at most
# 1, 1, 1 and 1/4 respectively, so the content similarity never exceeds
# (1 + 1 + 1 + 0.25) / 4.
CONTENT_SIMILARITY_MAX = 0.8125

# Fixed working range of the skewness slots.  Skewness of a bounded sample is
# unbounded in theory, so the chi-square shift needs a pinned range; values
# outside it are clamped.
SKEWNESS_BOUND = 10.0

Features = Union[FeatureVector, RegionAggregate]

# Per-component clamp bounds and non-negativity shifts for the packed
# descriptor, derived from each slot's fixed global range:
#   mean L in [0, 100]; mean a, b in [-128, 127]; variance >= 0;
#   skewness clamped to [-10, 10]; histograms in [0, 1]; contrast >= 0;
#   correlation in [-1, 1]; energy in [0, 1]; entropy >= 0.
_CLIP_LO = np.zeros(PACKED_LENGTH)
_CLIP_HI = np.full(PACKED_LENGTH, np.inf)
_SHIFTS = np.zeros(PACKED_LENGTH)

_CLIP_LO[0], _CLIP_HI[0] = 0.0, 100.0
_CLIP_LO[1:3], _CLIP_HI[1:3] = -128.0, 127.0
_SHIFTS[1:3] = 128.0
_CLIP_LO[3:6] = 0.0
_CLIP_LO[6:9], _CLIP_HI[6:9] = -SKEWNESS_BOUND, SKEWNESS_BOUND
_SHIFTS[6:9] = SKEWNESS_BOUND
_CLIP_LO[9:39], _CLIP_HI[9:39] = 0.0, 1.0
_CLIP_LO[39] = 0.0
_CLIP_LO[40], _CLIP_HI[40] = -1.0, 1.0
_SHIFTS[40] = 1.0
_CLIP_LO[41], _CLIP_HI[41] = 0.0, 1.0
_CLIP_LO[42] = 0.0
_CLIP_LO[43:63], _CLIP_HI[43:63] = 0.0, 1.0


@dataclass(frozen=True)
class SimilarityParams:
    """sigma: std-dev of the Gaussian membership kernel."""

    sigma: float = 0.5

    def validate(self) -> None:
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


def chi2(x, y) -> float:
    """Chi-square distance sum((x_i - y_i)^2 / (x_i + y_i)).

    Components must be non-negative; terms with a zero denominator contribute
    zero.  Symmetric by construction.
    """
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape:
        raise ValueError(f"length mismatch: {xa.shape} vs {ya.shape}")
    if (xa < 0).any() or (ya < 0).any():
        raise ValueError("chi2 requires non-negative components")
    denom = xa + ya
    num = (xa - ya) ** 2
    terms = np.zeros_like(denom)
    ok = denom > 0
    terms[ok] = num[ok] / denom[ok]
    return float(terms.sum())


def membership(x, sigma: float):
    """Zero-centered Gaussian kernel exp(-0.5 * (x / sigma)^2).

    Maps a non-negative distance to a similarity in (0, 1]; decreasing in x.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    xa = np.asarray(x, dtype=np.float64)
    if (xa < 0).any():
        raise ValueError("membership expects non-negative distances")
    out = np.exp(-0.5 * (xa / sigma) ** 2)
    return float(out) if np.isscalar(x) or xa.ndim == 0 else out


def _packed_of(x: Features) -> np.ndarray:
    if isinstance(x, RegionAggregate):
        return x.features.packed
    return x.packed


def _nonneg(packed: np.ndarray) -> np.ndarray:
    return np.clip(packed, _CLIP_LO, _CLIP_HI) + _SHIFTS


def feature_similarities(a: Features, b: Features, params: SimilarityParams) -> np.ndarray:
    """The 10 per-slot similarities S_0..S_9, each in [0, 1]."""
    pa = _nonneg(_packed_of(a))
    pb = _nonneg(_packed_of(b))
    denom = pa + pb
    num = (pa - pb) ** 2
    terms = np.zeros(PACKED_LENGTH)
    ok = denom > 0
    terms[ok] = num[ok] / denom[ok]
    chi = np.add.reduceat(terms, SLOT_STARTS)
    return np.exp(-0.5 * (chi / params.sigma) ** 2)


def content_similarity(a: Features, b: Features, params: SimilarityParams) -> float:
    """(S_max + S_min + S_mean + S_var) / 4 over the per-slot similarities.

    S_var is the population variance.  Identical inputs score exactly 0.75.
    """
    s = feature_similarities(a, b, params)
    return float(0.25 * (s.max() + s.min() + s.mean() + s.var()))


def border_similarity(
    couples: Sequence[tuple[int, int]],
    sp_features: Mapping[int, FeatureVector],
    params: SimilarityParams,
) -> float:
    """Mean content similarity over the superpixel couples along a border.

    A superpixel facing several neighbors on the other side contributes once
    per couple.  Raises when there is no couple (non-adjacent regions).
    """
    if not couples:
        raise ValueError("regions share no border couple (not adjacent)")
    total = 0.0
    for p, q in couples:
        total += content_similarity(sp_features[p], sp_features[q], params)
    return total / len(couples)


def content_weight(size_a: int, size_b: int) -> float:
    """Size-balance weight sqrt(min(|R_i|, |R_j|) / max(|R_i|, |R_j|)).

    Sizes are superpixel counts; equal sizes give weight 1.
    """
    if size_a < 1 or size_b < 1:
        raise ValueError("region sizes must be positive")
    lo, hi = (size_a, size_b) if size_a <= size_b else (size_b, size_a)
    return float(np.sqrt(lo / hi))


def border_weight(beta: int, circ_a: int, circ_b: int) -> float:
    """Shared-border weight sqrt(beta * (C_i + C_j) / (2 * C_i * C_j)).

    beta is the count of 4-adjacent pixel pairs straddling the two regions,
    C the region circumferences in pixels.  beta must be positive: a zero
    border means the regions are not adjacent, which is an error, never a
    silent zero.
    """
    if beta <= 0:
        raise ValueError("regions share no border (beta = 0)")
    if circ_a <= 0 or circ_b <= 0:
        raise ValueError("circumferences must be positive")
    return float(np.sqrt(beta * (circ_a + circ_b) / (2.0 * circ_a * circ_b)))


def combine(sim_c: float, sim_b: float, w_c: float, w_b: float) -> float:
    """Weighted combination w_C * Sim_C + w_B * Sim_B."""
    return w_c * sim_c + w_b * sim_b
