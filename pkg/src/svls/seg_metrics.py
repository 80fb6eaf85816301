"""Segmentation accuracy metrics: overlap (DSC) and boundary overlap (Surface DSC).

Surfaces are represented as boundary voxels under face adjacency (4-neighbor
in 2D, 6-neighbor in 3D; the volume border counts as outside), and boundary
proximity is measured with a spacing-aware exact Euclidean distance transform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .volume import LabelVolume


@dataclass(frozen=True)
class SegmentationScores:
    """Per-class DSC and Surface DSC, with the tolerance used for the latter."""

    per_class_dsc: dict
    per_class_sd: dict
    tolerance_mm: float


def _check_compatible(reference: LabelVolume, predicted: LabelVolume, check_spacing: bool = True):
    if reference.dims != predicted.dims:
        raise ValueError(f"shape mismatch: {reference.dims} vs {predicted.dims}")
    if check_spacing and reference.spacing != predicted.spacing:
        raise ValueError(f"spacing mismatch: {reference.spacing} vs {predicted.spacing}")


def dice_masks(mask_t: np.ndarray, mask_p: np.ndarray) -> float:
    """2|T&P| / (|T|+|P|); 1.0 when both masks are empty."""
    size_t = int(mask_t.sum())
    size_p = int(mask_p.sum())
    if size_t + size_p == 0:
        return 1.0
    overlap = int((mask_t & mask_p).sum())
    return 2.0 * overlap / (size_t + size_p)


def dice(reference: LabelVolume, predicted: LabelVolume, class_id: int) -> float:
    """Dice similarity coefficient of one class between two label volumes."""
    _check_compatible(reference, predicted, check_spacing=False)
    if not (0 <= class_id < reference.num_classes):
        raise ValueError(f"class_id {class_id} out of range [0, {reference.num_classes})")
    return dice_masks(reference.data == class_id, predicted.data == class_id)


def boundary_mask(mask: np.ndarray) -> np.ndarray:
    """Voxels of the mask with at least one face-adjacent neighbor outside it."""
    mask = np.asarray(mask, dtype=bool)
    structure = ndimage.generate_binary_structure(mask.ndim, 1)
    interior = ndimage.binary_erosion(mask, structure=structure, border_value=0)
    return mask & ~interior


def boundary_voxels(mask: np.ndarray) -> np.ndarray:
    """Coordinates (K, rank) of the boundary voxels, in lexicographic order."""
    return np.argwhere(boundary_mask(mask))


def surface_dice_masks(
    mask_t: np.ndarray, mask_p: np.ndarray, spacing, tolerance_mm: float
) -> float:
    """Surface DSC between two binary masks at a physical tolerance.

    Fraction of the two boundary-voxel sets lying within `tolerance_mm` of
    the other set, using spacing-aware Euclidean distances between voxel
    centers. 1.0 when both boundaries are empty, 0.0 when exactly one is.
    """
    if tolerance_mm < 0:
        raise ValueError(f"tolerance must be >= 0, got {tolerance_mm}")
    b_t = boundary_mask(mask_t)
    b_p = boundary_mask(mask_p)
    n_t = int(b_t.sum())
    n_p = int(b_p.sum())
    if n_t == 0 and n_p == 0:
        return 1.0
    if n_t == 0 or n_p == 0:
        return 0.0
    dist_to_p = ndimage.distance_transform_edt(~b_p, sampling=spacing)
    dist_to_t = ndimage.distance_transform_edt(~b_t, sampling=spacing)
    close_t = int((dist_to_p[b_t] <= tolerance_mm).sum())
    close_p = int((dist_to_t[b_p] <= tolerance_mm).sum())
    return (close_t + close_p) / (n_t + n_p)


def surface_dice(
    reference: LabelVolume, predicted: LabelVolume, class_id: int, tolerance_mm: float
) -> float:
    """Surface DSC of one class between two label volumes on the same grid."""
    _check_compatible(reference, predicted)
    if not (0 <= class_id < reference.num_classes):
        raise ValueError(f"class_id {class_id} out of range [0, {reference.num_classes})")
    return surface_dice_masks(
        reference.data == class_id, predicted.data == class_id, reference.spacing, tolerance_mm
    )


def score_segmentation(
    reference: LabelVolume,
    predicted: LabelVolume,
    tolerance_mm: float = 2.0,
    class_ids=None,
) -> SegmentationScores:
    """Compute DSC and Surface DSC for every class (or the requested subset)."""
    _check_compatible(reference, predicted)
    if class_ids is None:
        class_ids = range(reference.num_classes)
    dsc = {c: dice(reference, predicted, c) for c in class_ids}
    sd = {c: surface_dice(reference, predicted, c, tolerance_mm) for c in class_ids}
    return SegmentationScores(per_class_dsc=dsc, per_class_sd=sd, tolerance_mm=float(tolerance_mm))
