"""PNG overlays and report figures.

Figures are rendered headlessly to files next to the delimited outputs they
illustrate: over-segmentation sweep curves next to the sweep CSV, merge
progress next to the history file, metric distributions next to the dataset
report.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .labelmap import LabelMap, boundary_mask  # noqa: E402

OVERLAY_COLOR = (255, 40, 40)


def overlay_boundaries(rgb: np.ndarray, lm: LabelMap, color=OVERLAY_COLOR) -> np.ndarray:
    out = rgb.copy()
    out[boundary_mask(lm.labels)] = color
    return out


def save_overlay_png(rgb: np.ndarray, lm: LabelMap, path, color=OVERLAY_COLOR) -> None:
    Image.fromarray(overlay_boundaries(rgb, lm, color), mode="RGB").save(path, format="PNG")


def save_sweep_figure(rows, path) -> None:
    """BR and UE versus superpixel count for the plain and contour-split runs.

    ``rows`` are (k, br_slic, br_coslic, ue_slic, ue_coslic) tuples.
    """
    ks = [r[0] for r in rows]
    fig, (ax_br, ax_ue) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax_br.plot(ks, [r[1] for r in rows], "o-", label="SLIC")
    ax_br.plot(ks, [r[2] for r in rows], "s-", label="CoSLIC")
    ax_br.set_xlabel("superpixels (K)")
    ax_br.set_ylabel("boundary recall")
    ax_br.legend()
    ax_ue.plot(ks, [r[3] for r in rows], "o-", label="SLIC")
    ax_ue.plot(ks, [r[4] for r in rows], "s-", label="CoSLIC")
    ax_ue.set_xlabel("superpixels (K)")
    ax_ue.set_ylabel("under-segmentation error")
    ax_ue.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_progress_figure(stats, path) -> None:
    """Adaptive threshold and region count over the merge iterations."""
    its = [s.iteration for s in stats]
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.plot(its, [s.threshold for s in stats], color="tab:blue", label="threshold")
    ax.set_xlabel("iteration")
    ax.set_ylabel("similarity threshold", color="tab:blue")
    ax2 = ax.twinx()
    ax2.plot(its, [s.regions for s in stats], color="tab:red", label="regions")
    ax2.set_ylabel("regions", color="tab:red")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_metrics_figure(summary, path) -> None:
    """Histogram per final-segmentation metric over a dataset run."""
    ok = summary.ok
    fig, axes = plt.subplots(2, 2, figsize=(9, 6))
    for ax, name in zip(axes.ravel(), ("pri", "voi", "bde", "gce")):
        values = [getattr(r.report, name) for r in ok]
        if values:
            ax.hist(values, bins=min(20, max(3, len(values) // 2)), color="tab:blue")
        ax.set_title(name.upper())
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
