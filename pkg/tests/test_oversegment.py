import math

import numpy as np
import pytest

from spxseg.image_core import canny, to_lab
from spxseg.labelmap import LabelMap, boundary_mask, partition_components
from spxseg.metrics import boundary_recall, undersegmentation_error
from spxseg.oversegment import SlicParams, color_spatial_distance, coslic_split, slic

from conftest import voronoi_image


class TestDistanceKernel:
    def test_direct_substitution(self):
        # d_c=3, m=3, d_S=8, S=8 -> sqrt(1 + 1) = sqrt(2)
        assert color_spatial_distance(3, 8, 3, 8) == pytest.approx(math.sqrt(2))

    def test_scalar_hand_value(self):
        assert color_spatial_distance(6, 0, 3, 8) == pytest.approx(2.0)


class TestSlic:
    def test_constant_image_grid_partition(self):
        lab = to_lab(np.full((40, 40, 3), 128, dtype=np.uint8))
        lm = slic(lab, SlicParams(k=4))
        assert lm.num_labels == 4
        sizes = lm.sizes()
        assert sizes.sum() == 40 * 40
        # near-equal rectangles: the color term is zero so cells are the
        # spatial Voronoi of the 2x2 center grid
        assert sizes.min() >= 0.8 * (1600 / 4) and sizes.max() <= 1.25 * (1600 / 4)
        for label in range(4):
            ys, xs = np.nonzero(lm.labels == label)
            h = ys.max() - ys.min() + 1
            w = xs.max() - xs.min() + 1
            assert h * w == len(ys)  # exact rectangle

    def test_k_equals_n_every_pixel_own_superpixel(self):
        lab = to_lab(np.arange(48, dtype=np.uint8).reshape(4, 4, 3))
        lm = slic(lab, SlicParams(k=16))
        assert lm.num_labels == 16
        assert (lm.sizes() == 1).all()

    def test_k_larger_than_n_rejected(self):
        lab = to_lab(np.zeros((4, 4, 3), dtype=np.uint8))
        with pytest.raises(ValueError):
            slic(lab, SlicParams(k=17))

    def test_params_validated(self):
        lab = to_lab(np.zeros((4, 4, 3), dtype=np.uint8))
        with pytest.raises(ValueError):
            slic(lab, SlicParams(k=0))
        with pytest.raises(ValueError):
            slic(lab, SlicParams(k=4, m=0))
        with pytest.raises(ValueError):
            slic(lab, SlicParams(k=4, max_iters=0))

    def test_partition_and_connectivity(self, rng):
        img = rng.integers(0, 256, size=(60, 80, 3)).astype(np.uint8)
        lm = slic(to_lab(img), SlicParams(k=50))
        assert lm.sizes().sum() == 60 * 80
        n_comp, _ = partition_components(lm.labels)
        assert n_comp == lm.num_labels

    def test_deterministic(self, rng):
        img = rng.integers(0, 256, size=(40, 40, 3)).astype(np.uint8)
        a = slic(to_lab(img), SlicParams(k=30))
        b = slic(to_lab(img), SlicParams(k=30))
        assert np.array_equal(a.labels, b.labels)

    def test_first_assignment_matches_bruteforce_oracle(self, rng):
        """One assignment step against a scalar re-implementation of the
        window search using the public distance kernel."""
        img = rng.integers(0, 256, size=(12, 12, 3)).astype(np.uint8)
        lab = to_lab(img)
        params = SlicParams(k=4, m=10.0, max_iters=1)
        lm = slic(lab, params)

        h, w = 12, 12
        s = math.sqrt(h * w / params.k)
        nx = max(1, round(w / s))
        ny = max(1, round(h / s))
        centers = []
        for j in range(ny):
            for i in range(nx):
                cy, cx = (j + 0.5) * h / ny, (i + 0.5) * w / nx
                py, px = min(h - 1, int(cy)), min(w - 1, int(cx))
                centers.append((cy, cx, lab[py, px]))
        expect = np.full((h, w), -1)
        bestd = np.full((h, w), np.inf)
        for k, (cy, cx, clab) in enumerate(centers):
            for y in range(max(0, math.floor(cy - s)), min(h, math.ceil(cy + s) + 1)):
                for x in range(max(0, math.floor(cx - s)), min(w, math.ceil(cx + s) + 1)):
                    dc = math.dist(lab[y, x], clab)
                    ds = math.hypot(y - cy, x - cx)
                    d = color_spatial_distance(dc, ds, params.m, s)
                    if d < bestd[y, x]:
                        bestd[y, x] = d
                        expect[y, x] = k
        # the implementation runs connectivity enforcement afterwards, so only
        # compare the grouping of the dominant assignment: rebuild via the same
        # enforcement entry point
        from spxseg.oversegment import _enforce_connectivity

        expected_lm = _enforce_connectivity(expect.astype(np.int32), h * w / params.k)
        assert np.array_equal(lm.labels, expected_lm.labels)


class TestCoslicSplit:
    def test_no_contours_identity(self, rng):
        img = rng.integers(0, 256, size=(30, 30, 3)).astype(np.uint8)
        lab = to_lab(img)
        lm = slic(lab, SlicParams(k=9))
        out = coslic_split(lm, np.zeros((30, 30), dtype=bool), lab)
        assert np.array_equal(out.labels, lm.labels)

    def test_vertical_contour_splits_single_superpixel(self):
        # one 10x10 superpixel, vertical contour at column 5
        lab = np.zeros((10, 10, 3))
        lab[:, :5, 0] = 10.0
        lab[:, 5:, 0] = 90.0
        lm = LabelMap.from_array(np.zeros((10, 10), dtype=np.int32))
        contours = np.zeros((10, 10), dtype=bool)
        contours[:, 5] = True
        out = coslic_split(lm, contours, lab)
        assert out.num_labels == 2
        # independent connected-components verification
        n_comp, _ = partition_components(out.labels)
        assert n_comp == 2
        # contour-column pixels attach to the nearest-color side: L=90 at the
        # contour is closer to the right side
        left = out.labels[0, 0]
        right = out.labels[0, 9]
        assert (out.labels[:, 5] == right).all()
        assert (out.labels[:, :5] == left).all()

    def test_dimension_mismatch(self):
        lab = np.zeros((4, 4, 3))
        lm = LabelMap.from_array(np.zeros((4, 4), dtype=np.int32))
        with pytest.raises(ValueError):
            coslic_split(lm, np.zeros((5, 4), dtype=bool), lab)

    def test_partition_totality_and_connectivity(self, rng):
        img, _ = voronoi_image(60, 80, 6, seed=3)
        lab = to_lab(img)
        contours = canny(img)
        lm = slic(lab, SlicParams(k=40))
        out = coslic_split(lm, contours, lab)
        assert out.sizes().sum() == 60 * 80
        assert (out.sizes() > 0).all()
        n_comp, _ = partition_components(out.labels)
        assert n_comp == out.num_labels

    def test_monotone_refinement(self, rng):
        img, _ = voronoi_image(60, 60, 5, seed=11)
        lab = to_lab(img)
        contours = canny(img)
        lm = slic(lab, SlicParams(k=30))
        out = coslic_split(lm, contours, lab)
        # every output superpixel lies inside exactly one input superpixel
        for new_label in range(out.num_labels):
            parents = np.unique(lm.labels[out.labels == new_label])
            assert len(parents) == 1

    def test_interiors_avoid_contours(self, rng):
        """Relaxed split condition: within a split superpixel, non-contour
        pixels of different sub-superpixels are never 4-adjacent across the
        contour line unless the contour was absorbed there."""
        img, _ = voronoi_image(50, 50, 4, seed=5)
        lab = to_lab(img)
        contours = canny(img)
        lm = slic(lab, SlicParams(k=25))
        out = coslic_split(lm, contours, lab)
        # boundary of the refined map covers the old boundary (refinement)
        old_b = boundary_mask(lm.labels)
        new_b = boundary_mask(out.labels)
        assert (new_b | ~old_b).all()

    def test_boundary_recall_never_drops(self, rng):
        """Refinement makes the CoSLIC boundary a superset, so BR cannot drop."""
        for seed in range(3):
            img, gt = voronoi_image(64, 64, 5, seed=seed)
            lab = to_lab(img)
            contours = canny(img)
            lm = slic(lab, SlicParams(k=30))
            out = coslic_split(lm, contours, lab)
            assert boundary_recall(out, gt) >= boundary_recall(lm, gt)
            assert undersegmentation_error(out, gt) <= undersegmentation_error(lm, gt) + 1e-12

    def test_determinism(self, rng):
        img, _ = voronoi_image(48, 48, 4, seed=9)
        lab = to_lab(img)
        contours = canny(img)
        lm = slic(lab, SlicParams(k=20))
        a = coslic_split(lm, contours, lab)
        b = coslic_split(lm, contours, lab)
        assert np.array_equal(a.labels, b.labels)
