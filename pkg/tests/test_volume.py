import numpy as np
import pytest

from svls import LabelVolume, SoftLabelVolume, argmax_labels, one_hot_encode, replicate_pad

from conftest import random_labels


def test_one_hot_single_voxel():
    vol = LabelVolume(np.array([[2]], dtype=np.uint8), (1.0, 1.0), 4)
    soft = one_hot_encode(vol)
    assert soft.data[:, 0, 0].tolist() == [0.0, 0.0, 1.0, 0.0]


def test_one_hot_all_background():
    vol = LabelVolume(np.zeros((4, 5), dtype=np.uint8), (1.0, 1.0), 2)
    soft = one_hot_encode(vol)
    assert np.all(soft.data[0] == 1.0)
    assert np.all(soft.data[1] == 0.0)


def test_one_hot_matches_patch_lookup(rng):
    patch = (rng.random((3, 3)) < 0.5).astype(np.uint8)
    vol = LabelVolume(patch, (1.0, 1.0), 2)
    soft = one_hot_encode(vol)
    for i in range(3):
        for j in range(3):
            assert soft.data[patch[i, j], i, j] == 1.0
            assert soft.data[1 - patch[i, j], i, j] == 0.0


def test_one_hot_sums_to_one(rng):
    vol = random_labels(rng, (4, 5, 6), 5)
    soft = one_hot_encode(vol)
    assert np.all(soft.data.sum(axis=0) == 1.0)


def test_replicate_pad_1d_examples():
    view = replicate_pad(np.array([5.0, 7.0, 9.0]), 1)
    assert view[-1] == 5.0
    assert view[3] == 9.0
    assert view[1] == 7.0


def test_replicate_pad_width_zero_identity():
    grid = np.arange(6.0).reshape(2, 3)
    view = replicate_pad(grid, 0)
    for i in range(2):
        for j in range(3):
            assert view[i, j] == grid[i, j]


def test_replicate_pad_constant_grid():
    view = replicate_pad(np.full((3, 3), 0.4), 1)
    values = [view[i, j] for i in range(-1, 4) for j in range(-1, 4)]
    assert len(values) == 25
    assert all(v == 0.4 for v in values)


def test_replicate_pad_preserves_min_max(rng):
    grid = rng.random((4, 4, 4))
    padded = replicate_pad(grid, 1).to_array()
    assert padded.min() == grid.min()
    assert padded.max() == grid.max()


def test_replicate_pad_out_of_border_raises():
    view = replicate_pad(np.array([1.0, 2.0]), 1)
    with pytest.raises(IndexError):
        view[-2]
    with pytest.raises(IndexError):
        view[3]


def test_argmax_strict_maximum():
    soft = SoftLabelVolume(np.array([0.2, 0.5, 0.3], dtype=np.float32).reshape(3, 1, 1), (1.0, 1.0))
    assert argmax_labels(soft).data[0, 0] == 1


def test_argmax_tie_breaks_low():
    soft = SoftLabelVolume(np.array([0.5, 0.5], dtype=np.float32).reshape(2, 1, 1), (1.0, 1.0))
    assert argmax_labels(soft).data[0, 0] == 0


def test_argmax_one_hot_roundtrip(rng):
    vol = random_labels(rng, (5, 4, 3), 4)
    back = argmax_labels(one_hot_encode(vol))
    assert np.array_equal(back.data, vol.data)
    assert back.num_classes == vol.num_classes
    assert back.spacing == vol.spacing


def test_argmax_rejects_bad_sums():
    data = np.full((2, 2, 2), 0.4, dtype=np.float32)
    soft = SoftLabelVolume.__new__(SoftLabelVolume)  # bypass ctor to probe the op's own check
    object.__setattr__(soft, "data", data)
    object.__setattr__(soft, "spacing", (1.0, 1.0))
    with pytest.raises(ValueError, match="sum"):
        argmax_labels(soft)


def test_label_volume_rejects_out_of_range():
    with pytest.raises(ValueError):
        LabelVolume(np.array([[0, 3]], dtype=np.uint8), (1.0, 1.0), 3)


def test_label_volume_rejects_single_class():
    with pytest.raises(ValueError):
        LabelVolume(np.zeros((2, 2), dtype=np.uint8), (1.0, 1.0), 1)


def test_label_volume_rejects_bad_spacing():
    with pytest.raises(ValueError):
        LabelVolume(np.zeros((2, 2), dtype=np.uint8), (1.0, 0.0), 2)
    with pytest.raises(ValueError):
        LabelVolume(np.zeros((2, 2), dtype=np.uint8), (1.0, 1.0, 1.0), 2)


def test_soft_volume_rejects_bad_sum():
    data = np.full((2, 2, 2), 0.6, dtype=np.float32)
    with pytest.raises(ValueError, match=r"voxel \(0, 0\)"):
        SoftLabelVolume(data, (1.0, 1.0))


def test_soft_volume_rejects_out_of_range():
    data = np.array([[[1.2]], [[-0.2]]], dtype=np.float32)
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        SoftLabelVolume(data, (1.0, 1.0))


def test_volumes_are_immutable(rng):
    vol = random_labels(rng, (3, 3), 2)
    with pytest.raises(ValueError):
        vol.data[0, 0] = 1
    soft = one_hot_encode(vol)
    with pytest.raises(ValueError):
        soft.data[0, 0, 0] = 0.5
