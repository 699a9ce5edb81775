"""Dense label maps.

A :class:`LabelMap` is the single representation used for superpixels,
intermediate regions, final segmentations and ground-truth annotations:
a 2-D integer array where every label in ``[0, num_labels)`` is used by at
least one pixel.  Maps produced by the segmentation pipeline additionally
keep every label 4-connected; ground-truth maps are exempt from that.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import sparse
from scipy.sparse import csgraph

MAX_PNG_LABELS = 1 << 16  # 16-bit grayscale export ceiling


@dataclass(frozen=True)
class LabelMap:
    """Total partition of an image grid into integer-labelled regions."""

    labels: np.ndarray
    num_labels: int

    def __post_init__(self):
        if self.labels.ndim != 2 or self.labels.size == 0:
            raise ValueError("label map must be a non-empty 2-D array")

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape  # type: ignore[return-value]

    @property
    def size(self) -> int:
        return self.labels.size

    @classmethod
    def from_array(cls, labels, require_connected: bool = False) -> "LabelMap":
        """Validate and wrap a raw label array.

        Checks that labels are non-negative integers forming a dense range
        with no unused label.  With ``require_connected`` every label's pixel
        set must additionally be one 4-connected component.
        """
        arr = np.asarray(labels)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("label map must be a non-empty 2-D array")
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"label map must be integer-typed, got {arr.dtype}")
        if arr.min() < 0:
            raise ValueError("labels must be non-negative")
        num = int(arr.max()) + 1
        used = np.bincount(arr.ravel(), minlength=num)
        if (used == 0).any():
            missing = int(np.flatnonzero(used == 0)[0])
            raise ValueError(f"label {missing} is unused; labels must be dense")
        lm = cls(arr.astype(np.int32, copy=True), num)
        if require_connected:
            n_comp, _ = partition_components(lm.labels)
            if n_comp != num:
                raise ValueError(
                    f"{n_comp} connected components for {num} labels; "
                    "each label must be a single 4-connected component"
                )
        return lm

    def sizes(self) -> np.ndarray:
        """Pixel count per label."""
        return np.bincount(self.labels.ravel(), minlength=self.num_labels)


def partition_components(labels: np.ndarray) -> tuple[int, np.ndarray]:
    """4-connected components of a label array, across all labels at once.

    Two pixels belong to the same component iff they are 4-adjacent and carry
    the same label.  Returns (component count, component-id map).
    """
    h, w = labels.shape
    n = h * w
    idx = np.arange(n).reshape(h, w)
    same_h = labels[:, :-1] == labels[:, 1:]
    same_v = labels[:-1, :] == labels[1:, :]
    rows = np.concatenate([idx[:, :-1][same_h], idx[:-1, :][same_v]])
    cols = np.concatenate([idx[:, 1:][same_h], idx[1:, :][same_v]])
    graph = sparse.coo_matrix(
        (np.ones(rows.size, dtype=bool), (rows, cols)), shape=(n, n)
    )
    n_comp, comp = csgraph.connected_components(graph, directed=False)
    return n_comp, comp.reshape(h, w).astype(np.int32)


def relabel_compact(lm: LabelMap) -> LabelMap:
    """Renumber labels to a dense ``[0, num_labels)`` range.

    Grouping is preserved exactly; new ids follow ascending old ids.
    """
    uniq, inverse = np.unique(lm.labels, return_inverse=True)
    if uniq.size == lm.num_labels and uniq[0] == 0 and uniq[-1] == lm.num_labels - 1:
        return lm
    return LabelMap(inverse.reshape(lm.shape).astype(np.int32), int(uniq.size))


def compact_from_array(labels: np.ndarray) -> LabelMap:
    """Build a LabelMap from an arbitrary integer array, densifying labels."""
    arr = np.asarray(labels)
    uniq, inverse = np.unique(arr, return_inverse=True)
    return LabelMap(inverse.reshape(arr.shape).astype(np.int32), int(uniq.size))


def boundary_mask(labels: np.ndarray) -> np.ndarray:
    """Boundary pixels of a label array.

    A pixel is a boundary pixel when its east or south 4-neighbor carries a
    different label; the image border itself is not a boundary.  This single-
    sided convention keeps a straight label seam one pixel wide, which the
    boundary metrics rely on.
    """
    b = np.zeros(labels.shape, dtype=bool)
    b[:, :-1] |= labels[:, :-1] != labels[:, 1:]
    b[:-1, :] |= labels[:-1, :] != labels[1:, :]
    return b


def save_labelmap_png(lm: LabelMap, path) -> None:
    """Write a label map as 16-bit grayscale PNG (pixel value = label)."""
    if lm.num_labels > MAX_PNG_LABELS:
        raise ValueError(
            f"{lm.num_labels} labels exceed the 16-bit PNG range ({MAX_PNG_LABELS})"
        )
    Image.fromarray(lm.labels.astype(np.uint16)).save(path, format="PNG")


def load_labelmap_png(path) -> np.ndarray:
    """Read a 16-bit grayscale PNG written by :func:`save_labelmap_png`."""
    with Image.open(path) as im:
        if im.format != "PNG":
            raise ValueError(f"{path}: expected PNG, got {im.format}")
        if im.mode not in ("I;16", "I", "I;16B"):
            raise ValueError(
                f"{path}: unsupported bit depth (mode {im.mode}); "
                "label maps must be 16-bit grayscale"
            )
        return np.asarray(im, dtype=np.int64).astype(np.int32)
