import numpy as np
import pytest

from svls import (
    LabelVolume,
    RaterSet,
    SmoothingSpec,
    argmax_labels,
    label_smooth,
    moh_fuse,
    msvls_fuse,
    one_hot_encode,
    svls_smooth,
    svls_weights,
)

from conftest import random_labels
from oracles import naive_svls


def grid(data, num_classes=2):
    data = np.asarray(data, dtype=np.uint8)
    return LabelVolume(data, (1.0,) * data.ndim, num_classes)


def test_label_smooth_four_classes():
    soft = label_smooth(grid([[0]], num_classes=4), 0.1)
    expected = np.float32([0.925, 0.025, 0.025, 0.025])
    assert np.array_equal(soft.data[:, 0, 0], expected)


def test_label_smooth_alpha_zero_is_one_hot(rng):
    vol = random_labels(rng, (4, 4), 3)
    assert np.array_equal(label_smooth(vol, 0.0).data, one_hot_encode(vol).data)


def test_label_smooth_binary():
    soft = label_smooth(grid([[1]]), 0.3)
    assert np.array_equal(soft.data[:, 0, 0], np.float32([0.15, 0.85]))


def test_label_smooth_rejects_bad_alpha():
    with pytest.raises(ValueError):
        label_smooth(grid([[0]]), 1.5)
    with pytest.raises(ValueError):
        label_smooth(grid([[0]]), -0.1)


@pytest.mark.parametrize("alpha", [0.1, 0.2, 0.3])
@pytest.mark.parametrize("num_classes", [2, 3, 5])
def test_label_smooth_argmax_recovers_labels(rng, alpha, num_classes):
    vol = random_labels(rng, (4, 5), num_classes)
    assert np.array_equal(argmax_labels(label_smooth(vol, alpha)).data, vol.data)


def test_svls_homogeneous_is_one_hot():
    vol = grid(np.ones((5, 5)))
    soft = svls_smooth(vol, svls_weights(2))
    assert np.array_equal(soft.data, one_hot_encode(vol).data)


@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
def test_svls_isolated_center_splits_evenly(sigma):
    data = np.zeros((3, 3), dtype=np.uint8)
    data[1, 1] = 1
    soft = svls_smooth(grid(data), svls_weights(2, sigma))
    assert soft.data[0, 1, 1] == np.float32(0.5)
    assert soft.data[1, 1, 1] == np.float32(0.5)


def test_svls_straight_boundary_worked_value():
    # center voxel class 0 with its 3 upper neighbors class 1: the class-1
    # probability is (edge + 2 corners) / 2, frozen from the tap derivation
    data = np.zeros((3, 3), dtype=np.uint8)
    data[0, :] = 1
    soft = svls_smooth(grid(data), svls_weights(2))
    assert soft.data[1, 1, 1] == pytest.approx(0.1721925836, abs=1e-6)
    assert soft.data[0, 1, 1] == pytest.approx(0.8278074164, abs=1e-6)


def test_svls_matches_naive_oracle(rng):
    kernel2, kernel3 = svls_weights(2), svls_weights(3)
    for _ in range(10):
        rank = int(rng.integers(2, 4))
        dims = tuple(rng.integers(1, 8, size=rank))
        n = int(rng.integers(2, 5))
        vol = random_labels(rng, dims, n)
        kernel = kernel2 if rank == 2 else kernel3
        expected = naive_svls(vol.data, n, kernel.taps)
        got = svls_smooth(vol, kernel).data
        assert np.abs(got - expected).max() <= 1e-6


def test_svls_rank_mismatch_rejected():
    with pytest.raises(ValueError, match="rank"):
        svls_smooth(grid(np.zeros((3, 3))), svls_weights(3))


def test_svls_interior_identity(rng):
    # voxels whose full neighborhood shares a class map to exact one-hot
    vol = random_labels(rng, (7, 7, 7), 3)
    data = np.array(vol.data)
    data[1:6, 1:6, 1:6] = 2
    vol = LabelVolume(data, vol.spacing, 3)
    soft = svls_smooth(vol, svls_weights(3))
    assert np.all(soft.data[2, 2:5, 2:5, 2:5] == 1.0)
    assert np.all(soft.data[0, 2:5, 2:5, 2:5] == 0.0)


def test_svls_neighbor_relabel_increases_probability(rng):
    kernel = svls_weights(2)
    for _ in range(20):
        bits = rng.integers(0, 2, size=8)
        data = np.zeros((3, 3), dtype=np.uint8)
        positions = [(i, j) for i in range(3) for j in range(3) if (i, j) != (1, 1)]
        for (i, j), b in zip(positions, bits):
            data[i, j] = b
        base = svls_smooth(grid(data), kernel).data[1, 1, 1]
        flip = int(rng.integers(0, 8))
        if bits[flip] == 1:
            continue
        bumped = data.copy()
        bumped[positions[flip]] = 1
        assert svls_smooth(grid(bumped), kernel).data[1, 1, 1] > base


@pytest.mark.parametrize("method", ["ls", "svls", "msvls", "moh"])
def test_simplex_preservation(rng, method):
    for _ in range(10):
        rank = int(rng.integers(2, 4))
        dims = tuple(rng.integers(2, 7, size=rank))
        n = int(rng.integers(2, 6))
        vol = random_labels(rng, dims, n)
        if method == "ls":
            soft = label_smooth(vol, float(rng.uniform(0, 1)))
        elif method == "svls":
            soft = svls_smooth(vol, svls_weights(rank))
        else:
            raters = RaterSet(tuple(random_labels(rng, dims, n) for _ in range(3)))
            soft = msvls_fuse(raters, svls_weights(rank)) if method == "msvls" else moh_fuse(raters)
        sums = soft.data.sum(axis=0, dtype=np.float64)
        assert np.abs(sums - 1.0).max() <= 1e-6
        assert soft.data.min() >= 0.0 and soft.data.max() <= 1.0


def test_msvls_single_rater_equals_svls(rng):
    vol = random_labels(rng, (4, 4), 3)
    kernel = svls_weights(2)
    fused = msvls_fuse(RaterSet((vol,)), kernel)
    assert np.array_equal(fused.data, svls_smooth(vol, kernel).data)


def test_msvls_unanimous_interior():
    raters = RaterSet(tuple(grid(np.ones((5, 5))) for _ in range(3)))
    fused = msvls_fuse(raters, svls_weights(2))
    assert np.all(fused.data[1] == 1.0)


def test_msvls_averages_rater_probabilities():
    # rater 1: homogeneous class 1 (center value 1.0)
    # rater 2: isolated class-1 center (center value 0.5) -> mean 0.75
    iso = np.zeros((3, 3), dtype=np.uint8)
    iso[1, 1] = 1
    raters = RaterSet((grid(np.ones((3, 3))), grid(iso)))
    fused = msvls_fuse(raters, svls_weights(2))
    assert fused.data[1, 1, 1] == np.float32(0.75)


def test_moh_counts_votes():
    raters = RaterSet(tuple(grid([[1]]) for _ in range(3)) + (grid([[0]]),))
    fused = moh_fuse(raters)
    assert np.array_equal(fused.data[:, 0, 0], np.float32([0.25, 0.75]))


def test_moh_unanimous_is_one_hot(rng):
    vol = random_labels(rng, (4, 4), 3)
    fused = moh_fuse(RaterSet((vol, vol, vol)))
    assert np.array_equal(fused.data, one_hot_encode(vol).data)


def test_fusion_order_invariance(rng):
    dims, n = (4, 5), 3
    raters = [random_labels(rng, dims, n) for _ in range(4)]
    kernel = svls_weights(2)
    shuffled = [raters[2], raters[0], raters[3], raters[1]]
    assert np.array_equal(
        msvls_fuse(RaterSet(tuple(raters)), kernel).data,
        msvls_fuse(RaterSet(tuple(shuffled)), kernel).data,
    )
    assert np.array_equal(
        moh_fuse(RaterSet(tuple(raters))).data, moh_fuse(RaterSet(tuple(shuffled))).data
    )


def test_moh_zero_vs_msvls_positive_adjacent_class():
    # every rater labels the probe voxel class 1, but class 2 is adjacent in
    # every rater: vote fractions give class 2 zero there, smoothing does not
    base = np.zeros((5, 5), dtype=np.uint8)
    base[:, :2] = 1
    base[:, 2:4] = 2
    shifted = np.zeros((5, 5), dtype=np.uint8)
    shifted[:, :3] = 1
    shifted[:, 3:] = 2
    raters = RaterSet((grid(base, 3), grid(shifted, 3)))
    probe = (2, 1)  # class 1 for both raters, class 2 within one voxel for both
    fused_votes = moh_fuse(raters)
    fused_soft = msvls_fuse(raters, svls_weights(2))
    assert fused_votes.data[(2,) + probe] == 0.0
    assert fused_soft.data[(2,) + probe] > 0.0


def test_rater_set_validation(rng):
    with pytest.raises(ValueError):
        RaterSet(())
    a = random_labels(rng, (3, 3), 2)
    b = random_labels(rng, (4, 3), 2)
    with pytest.raises(ValueError, match="dims"):
        RaterSet((a, b))
    c = LabelVolume(np.zeros((3, 3), dtype=np.uint8), (2.0, 1.0), 2)
    with pytest.raises(ValueError, match="spacing"):
        RaterSet((a, c))


def test_smoothing_spec_validation():
    SmoothingSpec(method="svls", sigma=2.0)
    SmoothingSpec(method="ls", alpha=0.2)
    with pytest.raises(ValueError, match="alpha"):
        SmoothingSpec(method="ls")
    with pytest.raises(ValueError, match="method"):
        SmoothingSpec(method="blur")
    with pytest.raises(ValueError, match="sigma"):
        SmoothingSpec(method="svls", sigma=0.0)
