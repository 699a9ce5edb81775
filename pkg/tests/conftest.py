"""Shared synthetic-image builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from spxseg.labelmap import LabelMap

# four quadrant colors with strong pairwise luminance contrast on every
# adjacent seam (dark / bright / bright / dark checkerboard)
QUADRANT_COLORS = ((25, 25, 25), (235, 235, 235), (210, 210, 60), (70, 20, 130))


def quadrant_image(size=128, noise_sigma=5.0, seed=0):
    """High-contrast 4-quadrant image with mild noise, plus its ground truth."""
    rng = np.random.default_rng(seed)
    h = w = size
    img = np.zeros((h, w, 3), dtype=np.float64)
    img[: h // 2, : w // 2] = QUADRANT_COLORS[0]
    img[: h // 2, w // 2 :] = QUADRANT_COLORS[1]
    img[h // 2 :, : w // 2] = QUADRANT_COLORS[2]
    img[h // 2 :, w // 2 :] = QUADRANT_COLORS[3]
    if noise_sigma > 0:
        img = img + rng.normal(0.0, noise_sigma, img.shape)
    img = np.clip(img, 0, 255).astype(np.uint8)

    gt = np.zeros((h, w), dtype=np.int32)
    gt[: h // 2, w // 2 :] = 1
    gt[h // 2 :, : w // 2] = 2
    gt[h // 2 :, w // 2 :] = 3
    return img, LabelMap.from_array(gt)


def _distinct_colors(n, rng, min_dist=90.0):
    """Random RGB palette with a minimum pairwise Euclidean distance."""
    colors = []
    while len(colors) < n:
        cand = rng.uniform(10, 245, size=3)
        if all(np.linalg.norm(cand - c) >= min_dist for c in colors):
            colors.append(cand)
    return np.array(colors)


def voronoi_image(
    height, width, n_regions, noise_sigma=5.0, seed=0, min_color_dist=90.0, shading=0.0
):
    """Planted Voronoi mosaic (cells are convex, hence 4-connected) + ground truth.

    ``shading`` adds a per-cell linear luminance ramp of roughly that many
    gray levels, making the cells less trivially flat.
    """
    rng = np.random.default_rng(seed)
    seeds_y = rng.uniform(0, height, n_regions)
    seeds_x = rng.uniform(0, width, n_regions)
    ys, xs = np.mgrid[0:height, 0:width]
    d2 = (ys[..., None] - seeds_y) ** 2 + (xs[..., None] - seeds_x) ** 2
    cells = np.argmin(d2, axis=2).astype(np.int32)

    colors = _distinct_colors(n_regions, rng, min_color_dist)
    img = colors[cells]
    if shading > 0:
        span = max(height, width)
        gy = rng.uniform(-1, 1, n_regions) * shading / span
        gx = rng.uniform(-1, 1, n_regions) * shading / span
        ramp = gy[cells] * (ys - seeds_y[cells]) + gx[cells] * (xs - seeds_x[cells])
        img = img + ramp[..., None]
    if noise_sigma > 0:
        img = img + rng.normal(0.0, noise_sigma, img.shape)
    img = np.clip(img, 0, 255).astype(np.uint8)

    uniq, inverse = np.unique(cells, return_inverse=True)
    gt = LabelMap(inverse.reshape(cells.shape).astype(np.int32), int(uniq.size))
    return img, gt


def random_labelmap(rng, max_side=12, max_labels=6):
    """Random (not necessarily connected) label map for metric oracles."""
    h = int(rng.integers(1, max_side + 1))
    w = int(rng.integers(1, max_side + 1))
    n = int(rng.integers(1, max_labels + 1))
    arr = rng.integers(0, n, size=(h, w)).astype(np.int32)
    uniq, inverse = np.unique(arr, return_inverse=True)
    return LabelMap(inverse.reshape(h, w).astype(np.int32), int(uniq.size))


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
