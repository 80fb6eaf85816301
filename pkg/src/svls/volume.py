"""Core volume containers: integer label grids and per-class probability grids.

Volumes are 2D or 3D, carry physical voxel spacing (mm per axis), and are
immutable after construction. Probability volumes store the class axis first
so each class plane is contiguous.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Tolerance for per-voxel probability sums at construction time.
SUM_TOL = 1e-6

# Looser tolerance when interpreting possibly degraded predictions.
ARGMAX_SUM_TOL = 1e-3

MAX_CLASSES = 256  # labels are stored as uint8


def _check_spacing(spacing, rank: int) -> tuple[float, ...]:
    spacing = tuple(float(s) for s in spacing)
    if len(spacing) != rank:
        raise ValueError(f"spacing has {len(spacing)} entries for a rank-{rank} volume")
    if any(s <= 0 for s in spacing):
        raise ValueError(f"spacing must be strictly positive, got {spacing}")
    return spacing


def first_simplex_violation(planes: np.ndarray, tol: float):
    """Locate the first voxel whose class probabilities do not sum to 1.

    Returns (voxel_index_tuple, actual_sum) or None. Sums are accumulated in
    float64 regardless of storage dtype.
    """
    sums = planes.sum(axis=0, dtype=np.float64)
    bad = np.abs(sums - 1.0) > tol
    if not bad.any():
        return None
    idx = tuple(int(i) for i in np.unravel_index(int(np.argmax(bad)), sums.shape))
    return idx, float(sums[idx])


@dataclass(frozen=True)
class LabelVolume:
    """Dense integer class-ID grid with voxel spacing in millimeters.

    Every value must lie in [0, num_classes); dims are taken from the data
    array (2 or 3 axes).
    """

    data: np.ndarray
    spacing: tuple[float, ...]
    num_classes: int

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim not in (2, 3):
            raise ValueError(f"label volume must have 2 or 3 axes, got {arr.ndim}")
        if any(n < 1 for n in arr.shape):
            raise ValueError(f"all dims must be >= 1, got {arr.shape}")
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"labels must be integers, got dtype {arr.dtype}")
        if not (2 <= self.num_classes <= MAX_CLASSES):
            raise ValueError(f"num_classes must be in [2, {MAX_CLASSES}], got {self.num_classes}")
        if arr.size and (arr.min() < 0 or arr.max() >= self.num_classes):
            raise ValueError(
                f"labels must lie in [0, {self.num_classes}), "
                f"found range [{arr.min()}, {arr.max()}]"
            )
        arr = np.array(arr, dtype=np.uint8, order="C")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "spacing", _check_spacing(self.spacing, arr.ndim))

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def rank(self) -> int:
        return self.data.ndim


@dataclass(frozen=True)
class SoftLabelVolume:
    """Per-voxel class probability grid, shape (num_classes, *dims).

    Values must lie in [0, 1] and sum to 1 per voxel within SUM_TOL. Storage
    is float32 by default; float64 inputs are kept as-is (the loss evaluator
    needs the extra precision).
    """

    data: np.ndarray
    spacing: tuple[float, ...]

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim not in (3, 4):
            raise ValueError(
                f"probability volume must have a class axis plus 2 or 3 spatial axes, got {arr.ndim} axes"
            )
        if arr.shape[0] < 2:
            raise ValueError(f"need at least 2 classes, got {arr.shape[0]}")
        if any(n < 1 for n in arr.shape[1:]):
            raise ValueError(f"all dims must be >= 1, got {arr.shape[1:]}")
        dtype = np.float64 if arr.dtype == np.float64 else np.float32
        arr = np.array(arr, dtype=dtype, order="C")
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError(
                f"probabilities must lie in [0, 1], found range [{arr.min()}, {arr.max()}]"
            )
        violation = first_simplex_violation(arr, SUM_TOL)
        if violation is not None:
            idx, total = violation
            raise ValueError(f"voxel {idx} probabilities sum to {total}, expected 1 +/- {SUM_TOL}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "spacing", _check_spacing(self.spacing, arr.ndim - 1))

    @property
    def num_classes(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape[1:]

    @property
    def rank(self) -> int:
        return self.data.ndim - 1


class PaddedView:
    """Clamped-index window over a scalar grid.

    Reads at indices in [-width, dim + width) per axis return the nearest
    in-range voxel, i.e. view[i] == grid[clamp(i, 0, dim - 1)]. Reads beyond
    the declared border raise IndexError.
    """

    __slots__ = ("grid", "width")

    def __init__(self, grid: np.ndarray, width: int):
        if width < 0:
            raise ValueError(f"pad width must be >= 0, got {width}")
        self.grid = np.asarray(grid)
        self.width = int(width)

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        if len(idx) != self.grid.ndim:
            raise IndexError(f"expected {self.grid.ndim} indices, got {len(idx)}")
        clamped = []
        for i, n in zip(idx, self.grid.shape):
            if not (-self.width <= i < n + self.width):
                raise IndexError(f"index {i} outside padded range [{-self.width}, {n + self.width})")
            clamped.append(min(max(i, 0), n - 1))
        return self.grid[tuple(clamped)]

    def to_array(self) -> np.ndarray:
        """Materialize the padded grid (replicated borders) as a new array."""
        return np.pad(self.grid, self.width, mode="edge")


def replicate_pad(grid: np.ndarray, width: int) -> PaddedView:
    """Wrap a scalar grid in a border of the given width with replicated edges."""
    return PaddedView(grid, width)


def one_hot_encode(labels: LabelVolume) -> SoftLabelVolume:
    """Expand a label volume into indicator probability planes, one per class."""
    if labels.num_classes < 2:
        raise ValueError("one-hot encoding needs at least 2 classes")
    class_ids = np.arange(labels.num_classes, dtype=np.uint8)
    planes = (labels.data[None, ...] == class_ids.reshape((-1,) + (1,) * labels.rank))
    return SoftLabelVolume(planes.astype(np.float32), labels.spacing)


def argmax_labels(probs: SoftLabelVolume) -> LabelVolume:
    """Collapse a probability volume to hard labels (ties go to the lowest class).

    Rejects voxels whose probability sum deviates from 1 by more than 1e-3,
    which guards against accidentally feeding raw scores.
    """
    violation = first_simplex_violation(probs.data, ARGMAX_SUM_TOL)
    if violation is not None:
        idx, total = violation
        raise ValueError(f"voxel {idx} probabilities sum to {total}, expected 1 +/- {ARGMAX_SUM_TOL}")
    hard = np.argmax(probs.data, axis=0).astype(np.uint8)
    return LabelVolume(hard, probs.spacing, probs.num_classes)
