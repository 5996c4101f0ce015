"""Non-differentiable evaluation metrics on thresholded binary masks.

Masks are numpy arrays with values strictly in {0, 1}. The consistency
and inconsistency scores compare the quartet (label, prediction,
perturbed label, perturbed prediction): inconsistency is the fraction of
the active region whose prediction changed under perturbation beyond the
change the perturbation itself caused to the label.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor

__all__ = [
    "threshold",
    "iou",
    "binary_inconsistency",
    "binary_consistency",
    "border_artifact_rate",
]

DEFAULT_THRESHOLD = 0.5


def _as_array(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x)


def _check_binary(name: str, *masks) -> list[np.ndarray]:
    out = []
    shape = None
    for m in masks:
        a = _as_array(m)
        if shape is None:
            shape = a.shape
        elif a.shape != shape:
            raise ValueError(f"{name}: shape mismatch {a.shape} vs {shape}")
        if not np.all((a == 0) | (a == 1)):
            raise ValueError(f"{name}: mask values must be exactly 0 or 1")
        out.append(a.astype(np.uint8, copy=False))
    return out


def threshold(p, t: float = DEFAULT_THRESHOLD) -> np.ndarray:
    """Binarize a probability map: 1 where p > t (strict), else 0."""
    a = _as_array(p)
    if not (0.0 < t < 1.0):
        raise ValueError(f"threshold: t must be in (0,1), got {t}")
    if a.min(initial=0.0) < 0.0 or a.max(initial=1.0) > 1.0:
        raise ValueError("threshold: probabilities must lie in [0,1]")
    return (a > t).astype(np.uint8)


def iou(y, p) -> float:
    """Jaccard index |y AND p| / |y OR p|; 1.0 when both masks are empty."""
    ya, pa = _check_binary("iou", y, p)
    inter = int(np.sum(ya & pa))
    union = int(np.sum(ya | pa))
    if union == 0:
        return 1.0
    return inter / union


def binary_inconsistency(y, a, yhat, ahat) -> float:
    """XOR-chain count over the quartet, normalized by the union of all
    four masks; 0.0 when that union is empty."""
    ya, aa, yh, ah = _check_binary("binary_inconsistency", y, a, yhat, ahat)
    num = int(np.sum(ya ^ yh ^ aa ^ ah))
    den = int(np.sum(ya | aa | yh | ah))
    if den == 0:
        return 0.0
    return num / den


def binary_consistency(y, a, yhat, ahat) -> float:
    """Complement of binary_inconsistency on the same quartet."""
    return 1.0 - binary_inconsistency(y, a, yhat, ahat)


def border_artifact_rate(p, margin: int) -> float:
    """Fraction of pixels within ``margin`` of the image border that are
    predicted positive. Diagnoses the consistently-positive-margin
    failure mode of unweighted consistency training."""
    (pa,) = _check_binary("border_artifact_rate", p)
    if pa.ndim != 2:
        raise ValueError(f"border_artifact_rate: mask must be 2-d, got {pa.shape}")
    h, w = pa.shape
    if margin < 1 or margin >= min(h, w) / 2:
        raise ValueError(f"border_artifact_rate: margin {margin} out of range for {h}x{w}")
    band = np.ones((h, w), dtype=bool)
    band[margin : h - margin, margin : w - margin] = False
    return float(np.sum(pa[band])) / int(np.sum(band))
