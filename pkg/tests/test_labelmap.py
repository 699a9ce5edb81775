import numpy as np
import pytest

from spxseg.labelmap import (
    LabelMap,
    boundary_mask,
    compact_from_array,
    load_labelmap_png,
    partition_components,
    relabel_compact,
    save_labelmap_png,
)


def test_from_array_valid():
    lm = LabelMap.from_array(np.array([[0, 0], [1, 1]]))
    assert lm.num_labels == 2
    assert lm.width == 2 and lm.height == 2
    assert lm.sizes().tolist() == [2, 2]


def test_from_array_rejects_gaps():
    with pytest.raises(ValueError, match="unused"):
        LabelMap.from_array(np.array([[0, 2], [0, 2]]))


def test_from_array_rejects_negative_and_float():
    with pytest.raises(ValueError):
        LabelMap.from_array(np.array([[-1, 0]]))
    with pytest.raises(ValueError):
        LabelMap.from_array(np.array([[0.0, 1.0]]))


def test_connectivity_check():
    # label 0 appears in two separate corners
    arr = np.array([[0, 1, 0], [1, 1, 1]])
    LabelMap.from_array(arr)  # fine without the connectivity requirement
    with pytest.raises(ValueError, match="connected"):
        LabelMap.from_array(arr, require_connected=True)
    ok = np.array([[0, 0, 1], [1, 1, 1]])
    lm = LabelMap.from_array(ok, require_connected=True)
    assert lm.num_labels == 2


def test_partition_components_counts():
    arr = np.array([[0, 0, 1], [1, 0, 1]])
    n, comp = partition_components(arr)
    assert n == 3  # the two label-1 cells at (0,2)/(1,2) connect; (1,0) is alone
    assert comp.shape == arr.shape


def test_relabel_compact_dense_grouping():
    arr = np.array([[0, 5], [9, 5]])
    lm = compact_from_array(arr)
    assert lm.num_labels == 3
    # grouping preserved
    assert lm.labels[0, 1] == lm.labels[1, 1]
    assert len({lm.labels[0, 0], lm.labels[0, 1], lm.labels[1, 0]}) == 3


def test_relabel_compact_identity_when_dense():
    lm = LabelMap.from_array(np.array([[0, 1], [2, 0]]))
    again = relabel_compact(lm)
    assert again is lm


def test_boundary_mask_one_sided_vertical_seam():
    arr = np.zeros((4, 6), dtype=np.int32)
    arr[:, 3:] = 1
    b = boundary_mask(arr)
    ys, xs = np.nonzero(b)
    assert set(xs.tolist()) == {2}  # seam marked once, on the west side
    assert len(ys) == 4


def test_boundary_mask_empty_for_single_region():
    assert not boundary_mask(np.zeros((5, 5), dtype=np.int32)).any()


def test_labelmap_png_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    lm = compact_from_array(rng.integers(0, 300, size=(17, 23)))
    path = tmp_path / "labels.png"
    save_labelmap_png(lm, path)
    back = load_labelmap_png(path)
    assert np.array_equal(back, lm.labels)


def test_labelmap_png_label_ceiling(tmp_path):
    lm = LabelMap(np.arange(70000, dtype=np.int32).reshape(700, 100), 70000)
    with pytest.raises(ValueError, match="16-bit"):
        save_labelmap_png(lm, tmp_path / "big.png")


def test_load_labelmap_png_rejects_8bit(tmp_path):
    from PIL import Image

    Image.fromarray(np.zeros((4, 4), dtype=np.uint8), mode="L").save(tmp_path / "l8.png")
    with pytest.raises(ValueError, match="bit depth"):
        load_labelmap_png(tmp_path / "l8.png")
