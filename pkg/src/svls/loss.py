"""Cross-entropy against soft targets, with the analytic score gradient.

Lets the smoothing methods be verified end to end without a deep-learning
stack: softmax turns raw scores into predicted probabilities, cross_entropy
evaluates the loss against any soft target, and ce_gradient gives the exact
derivative with respect to the scores (softmax minus target).

All computation runs in float64; values are in nats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .volume import SoftLabelVolume, _check_spacing

LOG_FLOOR = 1e-12  # the loss is undefined at p=0; predictions are clamped here


@dataclass(frozen=True)
class LogitVolume:
    """Per-voxel real-valued score vectors, shape (num_classes, *dims)."""

    data: np.ndarray
    spacing: tuple[float, ...]

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, order="C")
        if arr.ndim not in (3, 4):
            raise ValueError(
                f"logit volume must have a class axis plus 2 or 3 spatial axes, got {arr.ndim} axes"
            )
        if arr.shape[0] < 2:
            raise ValueError(f"need at least 2 classes, got {arr.shape[0]}")
        if not np.isfinite(arr).all():
            raise ValueError("logits must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "spacing", _check_spacing(self.spacing, arr.ndim - 1))

    @property
    def num_classes(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape[1:]


@dataclass(frozen=True)
class LossReport:
    """Reduced cross-entropy over voxels plus the per-voxel grid behind it."""

    total: float
    per_voxel: np.ndarray


def softmax(logits: LogitVolume) -> SoftLabelVolume:
    """Exponential normalization per voxel, shifted by the max for stability."""
    shifted = logits.data - logits.data.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    probs = e / e.sum(axis=0, keepdims=True)
    return SoftLabelVolume(probs, logits.spacing)


def _check_same_grid(target: SoftLabelVolume, other) -> None:
    if target.data.shape != other.data.shape:
        raise ValueError(f"shape mismatch: target {target.data.shape} vs {other.data.shape}")


def cross_entropy(
    target: SoftLabelVolume, predicted: SoftLabelVolume, reduction: str = "mean"
) -> LossReport:
    """Per-voxel -sum_c target*log(predicted), reduced over voxels.

    The default reduction is the unweighted voxel mean; "sum" is available
    for callers that weight externally.
    """
    if reduction not in ("mean", "sum"):
        raise ValueError(f"reduction must be 'mean' or 'sum', got {reduction!r}")
    _check_same_grid(target, predicted)
    logs = np.log(np.maximum(predicted.data.astype(np.float64), LOG_FLOOR))
    per_voxel = -(target.data.astype(np.float64) * logs).sum(axis=0)
    total = per_voxel.mean() if reduction == "mean" else per_voxel.sum()
    return LossReport(total=float(total), per_voxel=per_voxel)


def ce_gradient(target: SoftLabelVolume, logits: LogitVolume) -> np.ndarray:
    """Derivative of the per-voxel cross-entropy w.r.t. the scores.

    Equals softmax(logits) - target; each voxel's gradient components sum
    to 0 because both terms sum to 1.
    """
    _check_same_grid(target, logits)
    return softmax(logits).data - target.data.astype(np.float64)
