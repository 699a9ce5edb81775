"""Superpixel over-segmentation.

``slic`` clusters pixels in the joint Lab+position space with the distance
d = sqrt((d_c/m)^2 + (d_S/S)^2), starting from a uniform grid of centers with
interval S = sqrt(N/K).  ``coslic_split`` then splits every superpixel that a
global contour crosses, so that no superpixel interior straddles a contour.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .labelmap import LabelMap, compact_from_array, partition_components, relabel_compact

__all__ = ["SlicParams", "slic", "coslic_split", "relabel_compact", "color_spatial_distance"]


@dataclass(frozen=True)
class SlicParams:
    """Superpixel clustering parameters.

    k: desired superpixel count; m: compactness weight trading color fit for
    spatial regularity; seed is reserved (the algorithm is deterministic).
    """

    k: int = 600
    m: float = 10.0
    max_iters: int = 10
    seed: int | None = None

    def validate(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.m <= 0:
            raise ValueError(f"m must be positive, got {self.m}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")


def color_spatial_distance(d_c: float, d_s: float, m: float, s: float) -> float:
    """Joint color/spatial clustering distance sqrt((d_c/m)^2 + (d_s/S)^2)."""
    return math.hypot(d_c / m, d_s / s)


def slic(lab: np.ndarray, params: SlicParams) -> LabelMap:
    """Cluster an image into approximately ``params.k`` compact superpixels.

    Deterministic: assignment ties go to the lower cluster index, and the
    update loop stops once no center moves a full pixel.  The output is
    post-processed so every label is one 4-connected component.
    """
    params.validate()
    h, w = lab.shape[:2]
    n = h * w
    if params.k > n:
        raise ValueError(f"k={params.k} exceeds pixel count {n}")

    s = math.sqrt(n / params.k)
    nx = max(1, round(w / s))
    ny = max(1, round(h / s))
    cx = (np.arange(nx) + 0.5) * (w / nx)
    cy = (np.arange(ny) + 0.5) * (h / ny)
    centers_xy = np.stack(
        [np.repeat(cy, nx), np.tile(cx, ny)], axis=1
    )  # (k, 2) as (y, x)
    py = np.clip(centers_xy[:, 0].astype(int), 0, h - 1)
    px = np.clip(centers_xy[:, 1].astype(int), 0, w - 1)
    centers_lab = lab[py, px].astype(np.float64)

    ys = np.arange(h, dtype=np.float64)
    xs = np.arange(w, dtype=np.float64)
    m2 = params.m * params.m
    s2 = s * s

    labels = np.full((h, w), -1, dtype=np.int32)
    for _ in range(params.max_iters):
        best = np.full((h, w), np.inf)
        labels.fill(-1)
        for k in range(len(centers_lab)):
            cyk, cxk = centers_xy[k]
            y0 = max(0, int(math.floor(cyk - s)))
            y1 = min(h, int(math.ceil(cyk + s)) + 1)
            x0 = max(0, int(math.floor(cxk - s)))
            x1 = min(w, int(math.ceil(cxk + s)) + 1)
            window = lab[y0:y1, x0:x1]
            dc2 = ((window - centers_lab[k]) ** 2).sum(axis=2)
            ds2 = (ys[y0:y1, None] - cyk) ** 2 + (xs[None, x0:x1] - cxk) ** 2
            d2 = dc2 / m2 + ds2 / s2
            sub_best = best[y0:y1, x0:x1]
            better = d2 < sub_best  # strict: ties keep the lower index
            sub_best[better] = d2[better]
            labels[y0:y1, x0:x1][better] = k

        if (labels < 0).any():
            _assign_orphans(labels, best, lab, centers_lab, centers_xy, m2, s2)

        flat = labels.ravel()
        counts = np.bincount(flat, minlength=len(centers_lab)).astype(np.float64)
        occupied = counts > 0
        new_xy = np.empty_like(centers_xy)
        grid_y, grid_x = np.mgrid[0:h, 0:w]
        new_xy[:, 0] = np.bincount(flat, weights=grid_y.ravel(), minlength=len(centers_lab))
        new_xy[:, 1] = np.bincount(flat, weights=grid_x.ravel(), minlength=len(centers_lab))
        new_xy[occupied] /= counts[occupied, None]
        new_xy[~occupied] = centers_xy[~occupied]
        new_lab = np.empty_like(centers_lab)
        for c in range(3):
            new_lab[:, c] = np.bincount(
                flat, weights=lab[..., c].ravel(), minlength=len(centers_lab)
            )
        new_lab[occupied] /= counts[occupied, None]
        new_lab[~occupied] = centers_lab[~occupied]

        movement = np.hypot(
            new_xy[:, 0] - centers_xy[:, 0], new_xy[:, 1] - centers_xy[:, 1]
        ).max()
        centers_xy, centers_lab = new_xy, new_lab
        if movement < 1.0:
            break

    return _enforce_connectivity(labels, n / params.k)


def _assign_orphans(labels, best, lab, centers_lab, centers_xy, m2, s2) -> None:
    """Assign any pixel missed by every search window to its best center."""
    ys, xs = np.nonzero(labels < 0)
    for y, x in zip(ys, xs):
        dc2 = ((centers_lab - lab[y, x]) ** 2).sum(axis=1)
        ds2 = (centers_xy[:, 0] - y) ** 2 + (centers_xy[:, 1] - x) ** 2
        d2 = dc2 / m2 + ds2 / s2
        k = int(np.argmin(d2))
        labels[y, x] = k
        best[y, x] = d2[k]


def _enforce_connectivity(labels: np.ndarray, cell_area: float) -> LabelMap:
    """Make every label a single 4-connected component.

    Each label keeps its largest component; other fragments either become new
    superpixels (when at least cell_area/4 pixels) or are absorbed by the
    largest adjacent superpixel.
    """
    n_comp, comp = partition_components(labels)
    comp_sizes = np.bincount(comp.ravel(), minlength=n_comp)
    order = np.argsort(comp.ravel(), kind="stable")
    starts = np.searchsorted(comp.ravel()[order], np.arange(n_comp))
    comp_orig = labels.ravel()[order[starts]]

    min_keep = cell_area / 4.0
    next_label = int(labels.max()) + 1
    # main component of each original label keeps it (largest; ties -> lowest comp id)
    keep_main = {}
    for cid in range(n_comp):
        lbl = int(comp_orig[cid])
        sz = int(comp_sizes[cid])
        cur = keep_main.get(lbl)
        if cur is None or sz > cur[0]:
            keep_main[lbl] = (sz, cid)
    assigned = np.full(n_comp, -1, dtype=np.int64)
    for lbl, (_, cid) in keep_main.items():
        assigned[cid] = lbl
    small = []
    for cid in range(n_comp):
        if assigned[cid] >= 0:
            continue
        if comp_sizes[cid] >= min_keep:
            assigned[cid] = next_label
            next_label += 1
        else:
            small.append(cid)

    if small:
        # adjacency between components
        pairs = set()
        for a, b in (
            (comp[:, :-1], comp[:, 1:]),
            (comp[:-1, :], comp[1:, :]),
        ):
            diff = a != b
            lo = np.minimum(a[diff], b[diff])
            hi = np.maximum(a[diff], b[diff])
            pairs.update(zip(lo.tolist(), hi.tolist()))
        adj: dict[int, list[int]] = {}
        for a, b in pairs:
            adj.setdefault(a, []).append(b)
            adj.setdefault(b, []).append(a)

        out = assigned.copy()
        pending = sorted(small, key=lambda cid: (-comp_sizes[cid], cid))
        while pending:
            progressed = False
            remaining = []
            label_sizes: dict[int, int] = {}
            for cid in range(n_comp):
                if out[cid] >= 0:
                    label_sizes[int(out[cid])] = (
                        label_sizes.get(int(out[cid]), 0) + int(comp_sizes[cid])
                    )
            for cid in pending:
                candidates = [int(out[nb]) for nb in adj.get(cid, []) if out[nb] >= 0]
                if not candidates:
                    remaining.append(cid)
                    continue
                # largest adjacent superpixel; ties -> lowest label
                candidates.sort(key=lambda lbl: (-label_sizes[lbl], lbl))
                out[cid] = candidates[0]
                progressed = True
            if not progressed and remaining:
                # isolated cluster of tiny fragments: promote the largest
                cid = remaining.pop(0)
                out[cid] = next_label
                next_label += 1
            pending = remaining
        assigned = out

    return compact_from_array(assigned[comp])


def coslic_split(sp: LabelMap, contours: np.ndarray, lab: np.ndarray) -> LabelMap:
    """Split superpixels crossed by global contours.

    Non-contour pixels of a crossed superpixel are re-labelled into their
    4-connected components; the contour pixels inside it are then attached to
    the 4-adjacent component with the nearest mean Lab color, so the result
    stays a total partition.  Components confined to the one-pixel band
    around the contour are contour-thickness artifacts and are attached the
    same way instead of surviving as unmergeable slivers.  Every output
    superpixel is a subset of exactly one input superpixel.
    """
    if contours.shape != sp.shape:
        raise ValueError(f"contour map {contours.shape} does not match labels {sp.shape}")
    if lab.shape[:2] != sp.shape:
        raise ValueError(f"Lab image {lab.shape[:2]} does not match labels {sp.shape}")

    labels = sp.labels
    contours = contours.astype(bool)
    totals = np.bincount(labels.ravel(), minlength=sp.num_labels)
    on_contour = np.bincount(
        labels.ravel(), weights=contours.ravel(), minlength=sp.num_labels
    ).astype(np.int64)
    crossed = (on_contour > 0) & (on_contour < totals)
    if not crossed.any():
        return relabel_compact(sp)

    # isolate contour pixels of crossed superpixels so components form only
    # over clean interior pixels
    work = labels.astype(np.int64).copy()
    iso = contours & crossed[labels]
    iso_count = int(iso.sum())
    work[iso] = sp.num_labels + np.arange(iso_count)

    _, comp = partition_components(work)
    n_comp = int(comp.max()) + 1
    n_ids = n_comp + sp.num_labels  # component ids plus one spare id per superpixel

    # components of crossed superpixels that never leave the contour band
    # are absorbed during attachment rather than kept as sub-superpixels
    band = ndimage.binary_dilation(contours, structure=np.ones((3, 3), dtype=bool))
    crossed_px = crossed[labels] & ~iso
    comp_size = np.bincount(comp[crossed_px].ravel(), minlength=n_comp)
    out_of_band = np.bincount(comp[crossed_px & ~band].ravel(), minlength=n_comp)
    confined = (comp_size > 0) & (out_of_band == 0)

    # a crossed superpixel left with no surviving component stays whole
    surviving_per_sp = np.zeros(sp.num_labels, dtype=np.int64)
    comp_parent = np.full(n_comp, -1, dtype=np.int64)
    comp_parent[comp[crossed_px]] = labels[crossed_px]
    keep = (comp_size > 0) & ~confined
    np.add.at(surviving_per_sp, comp_parent[keep], 1)
    unsplit_px = (crossed & (surviving_per_sp == 0))[labels]
    iso &= ~unsplit_px
    crossed_px &= ~unsplit_px

    unassigned = iso | (confined[comp] & crossed_px)
    out = comp.astype(np.int64).copy()
    out[unsplit_px] = n_comp + labels[unsplit_px]

    clean = ~unassigned
    comp_counts = np.bincount(out[clean].ravel(), minlength=n_ids).astype(np.float64)
    means = np.zeros((n_ids, 3))
    for c in range(3):
        acc = np.bincount(out[clean].ravel(), weights=lab[..., c][clean], minlength=n_ids)
        means[:, c] = np.divide(acc, comp_counts, out=np.zeros(n_ids), where=comp_counts > 0)

    h, w = labels.shape
    while unassigned.any():
        cand_comp, _ = _attachment_candidates(out, unassigned, labels, lab, means, h, w)
        ready = cand_comp >= 0
        if not ready.any():
            # cannot happen for connected superpixels with a clean pixel;
            # promote remaining pixels defensively to keep the partition total
            out[unassigned] = comp[unassigned] + n_ids
            break
        out[ready] = cand_comp[ready]
        unassigned &= ~ready

    return compact_from_array(out)


def _attachment_candidates(out, unassigned, parents, lab, means, h, w):
    """One attachment pass: nearest-mean assigned 4-neighbor within the parent.

    Returns per-pixel chosen component (-1 where no assigned neighbor exists
    yet) and the distance achieved.  Simultaneous (BFS-layer) updates keep the
    result independent of pixel visit order.
    """
    best_comp = np.full((h, w), -1, dtype=np.int64)
    best_dist = np.full((h, w), np.inf)
    assigned = ~unassigned

    for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        src_y = slice(max(0, -dy), h - max(0, dy))
        src_x = slice(max(0, -dx), w - max(0, dx))
        dst_y = slice(max(0, dy), h + min(0, dy))
        dst_x = slice(max(0, dx), w + min(0, dx))
        ok = (
            unassigned[src_y, src_x]
            & assigned[dst_y, dst_x]
            & (parents[src_y, src_x] == parents[dst_y, dst_x])
        )
        if not ok.any():
            continue
        nb_comp = out[dst_y, dst_x][ok]
        px_lab = lab[src_y, src_x][ok]
        dist = ((px_lab - means[nb_comp]) ** 2).sum(axis=1)
        sub_comp = best_comp[src_y, src_x]
        sub_dist = best_dist[src_y, src_x]
        cur_comp = sub_comp[ok]
        cur_dist = sub_dist[ok]
        better = (dist < cur_dist) | (
            (dist == cur_dist) & (nb_comp < np.where(cur_comp < 0, np.iinfo(np.int64).max, cur_comp))
        )
        cur_comp[better] = nb_comp[better]
        cur_dist[better] = dist[better]
        sub_comp[ok] = cur_comp
        sub_dist[ok] = cur_dist
        best_comp[src_y, src_x] = sub_comp
        best_dist[src_y, src_x] = sub_dist

    return best_comp, best_dist
