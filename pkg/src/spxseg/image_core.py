"""Image ingestion, CIE Lab conversion, gradient fields and contour extraction.

Everything downstream consumes the outputs of this module: Lab pixels feed the
superpixel clustering and the region descriptors, the Sobel gradient field
feeds the gradient histograms, and the Canny contour map drives both the
superpixel splitting and the merge-phase contour check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage

# sRGB -> XYZ (D65, 2 degree observer) and the D65 reference white.
_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_D65_WHITE = np.array([0.95047, 1.0, 1.08883])

# Canny defaults: blur std-dev and the median-based threshold heuristic.
DEFAULT_CANNY_SIGMA = 1.4
CANNY_LOW_FACTOR = 0.66
CANNY_HIGH_FACTOR = 1.33


@dataclass(frozen=True)
class GradientField:
    """Per-pixel Sobel gradient magnitude and orientation.

    Orientation is folded modulo pi into [0, pi): an edge and its reversal
    share one orientation.
    """

    magnitude: np.ndarray
    orientation: np.ndarray


def load_image(path) -> np.ndarray:
    """Load an 8-bit sRGB raster image (PNG or binary PPM).

    Returns a (H, W, 3) uint8 array.  Anything that is not 8-bit 3-channel
    RGB is rejected rather than silently converted.
    """
    try:
        with Image.open(path) as im:
            if im.format not in ("PNG", "PPM"):
                raise ValueError(f"{path}: unsupported format {im.format!r} (PNG or PPM required)")
            if im.mode != "RGB":
                raise ValueError(
                    f"{path}: mode {im.mode!r} not supported; 8-bit sRGB (RGB) required"
                )
            arr = np.asarray(im, dtype=np.uint8)
    except (OSError, SyntaxError) as exc:
        raise OSError(f"{path}: cannot read image ({exc})") from exc
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{path}: invalid image dimensions {arr.shape}")
    return arr


def to_lab(img: np.ndarray) -> np.ndarray:
    """Convert an 8-bit sRGB image to CIE Lab (D65).

    Pure function: equal inputs give bit-identical outputs.  Output is a
    (H, W, 3) float64 array with L in [0, 100] and a, b in roughly
    [-128, 127].
    """
    c = np.asarray(img, dtype=np.float64) / 255.0
    linear = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = linear @ _SRGB_TO_XYZ.T
    t = xyz / _D65_WHITE
    delta = 6.0 / 29.0
    f = np.where(t > delta**3, np.cbrt(t), t / (3.0 * delta**2) + 4.0 / 29.0)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def gradient_field(lab: np.ndarray) -> GradientField:
    """Sobel gradient of the L channel.

    magnitude = sqrt(gx^2 + gy^2); orientation = atan2(gy, gx) folded into
    [0, pi).  A vertical step of height dL yields magnitude 4*dL on the step
    column under the standard 3x3 kernel.
    """
    lum = lab[..., 0]
    gx = ndimage.sobel(lum, axis=1, mode="reflect")
    gy = ndimage.sobel(lum, axis=0, mode="reflect")
    magnitude = np.hypot(gx, gy)
    orientation = np.mod(np.arctan2(gy, gx), np.pi)
    return GradientField(magnitude, orientation)


def canny(
    img: np.ndarray,
    low: float | None = None,
    high: float | None = None,
    sigma: float = DEFAULT_CANNY_SIGMA,
) -> np.ndarray:
    """Canny contour map of an sRGB image, computed on the L channel.

    Gaussian blur -> Sobel gradients -> non-maximum suppression -> hysteresis
    thresholding.  When ``low``/``high`` are omitted they default to
    0.66/1.33 times the median L value, a reproducible parameter-free
    heuristic.  Returns a boolean mask of one-pixel-wide contours.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    lum = to_lab(img)[..., 0]
    if low is None or high is None:
        med = float(np.median(lum))
        if low is None:
            low = CANNY_LOW_FACTOR * med
        if high is None:
            high = CANNY_HIGH_FACTOR * med
    if not (0 <= low <= high):
        raise ValueError(f"thresholds must satisfy 0 <= low <= high, got {low}, {high}")

    smooth = ndimage.gaussian_filter(lum, sigma, mode="reflect")
    gx = ndimage.sobel(smooth, axis=1, mode="reflect")
    gy = ndimage.sobel(smooth, axis=0, mode="reflect")
    mag = np.hypot(gx, gy)
    theta = np.mod(np.arctan2(gy, gx), np.pi)

    thinned = _non_maximum_suppression(mag, theta)
    strong = thinned & (mag >= high)
    weak = thinned & (mag >= low)
    edges = ndimage.binary_dilation(
        strong, structure=np.ones((3, 3), dtype=bool), iterations=0, mask=weak
    )
    return edges


def _non_maximum_suppression(mag: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Keep only ridge pixels of the gradient magnitude.

    The gradient direction is quantized to 4 sectors and each pixel is
    compared against its two neighbors along the gradient.  The comparison is
    strict against the earlier neighbor and non-strict against the later one
    so that two-pixel plateaus (symmetric blurred steps) thin to a single
    deterministic line.
    """
    h, w = mag.shape
    padded = np.pad(mag, 1, mode="constant", constant_values=-1.0)
    north = padded[:-2, 1:-1]
    south = padded[2:, 1:-1]
    west = padded[1:-1, :-2]
    east = padded[1:-1, 2:]
    nw = padded[:-2, :-2]
    ne = padded[:-2, 2:]
    sw = padded[2:, :-2]
    se = padded[2:, 2:]

    sector = np.round(theta / (np.pi / 4.0)).astype(np.int8) % 4
    keep = np.zeros((h, w), dtype=bool)
    # sector 0: gradient ~ along x -> compare west (strict) / east
    # sector 1: gradient ~ down-right -> compare nw (strict) / se
    # sector 2: gradient ~ along y -> compare north (strict) / south
    # sector 3: gradient ~ down-left -> compare ne (strict) / sw
    for sec, first, second in (
        (0, west, east),
        (1, nw, se),
        (2, north, south),
        (3, ne, sw),
    ):
        m = sector == sec
        keep[m] = (mag[m] > first[m]) & (mag[m] >= second[m])
    return keep & (mag > 0)


def save_contour_png(contours: np.ndarray, path) -> None:
    """Debug export: contour pixels white on black."""
    Image.fromarray((contours.astype(np.uint8)) * 255, mode="L").save(path, format="PNG")
