"""Consistency training for binary segmentation at desk scale.

Smooth set operators and the segmentation inconsistency loss, a paired
image/mask perturbation model, deterministic synthetic environments with
distribution shifts, a tiny convolutional segmenter on a from-scratch
autodiff tensor, three training regimes, and the significance tests used
to compare them.
"""

from .loss import MaskQuartet, combined_loss, jaccard_loss, label_free_sil, sil_loss
from .metrics import (
    binary_consistency,
    binary_inconsistency,
    border_artifact_rate,
    iou,
    threshold,
)
from .softset import soft_intersection, soft_symmetric_difference, soft_union
from .stats import mann_whitney_u, welch_t_test
from .tensor import Tensor, conv2d, grad_check, reduce_sum

__version__ = "0.1.0"

__all__ = [
    "Tensor",
    "conv2d",
    "grad_check",
    "reduce_sum",
    "soft_symmetric_difference",
    "soft_union",
    "soft_intersection",
    "threshold",
    "iou",
    "binary_inconsistency",
    "binary_consistency",
    "border_artifact_rate",
    "MaskQuartet",
    "jaccard_loss",
    "sil_loss",
    "label_free_sil",
    "combined_loss",
    "welch_t_test",
    "mann_whitney_u",
]
