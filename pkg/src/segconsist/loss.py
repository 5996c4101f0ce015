"""Differentiable training objectives.

All losses return 0-d tensors in [0,1] and are built from the smooth set
operators, so gradients flow to the prediction maps only; labels and
replayed perturbations are constants by contract.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .softset import RANGE_TOL, _theta_fold, _union_fold
from .tensor import Tensor, reduce_sum

__all__ = [
    "MaskQuartet",
    "jaccard_loss",
    "sil_loss",
    "label_free_sil",
    "combined_loss",
]

DEFAULT_SMOOTH = 1e-6


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _constant(x: Tensor) -> Tensor:
    """Block gradient flow; cheap no-op for tensors outside the graph."""
    return x.detach() if x.requires_grad else x


def _check_binary_tensor(name: str, t: Tensor):
    if not np.all((t.data == 0) | (t.data == 1)):
        raise ValueError(f"{name}: label mask must be strictly binary")


def _check_unit_range(name: str, t: Tensor):
    if t.data.min(initial=0.0) < -RANGE_TOL or t.data.max(initial=1.0) > 1.0 + RANGE_TOL:
        raise ValueError(f"{name}: values outside [0,1]")


@dataclass
class MaskQuartet:
    """The four aligned maps consumed by the inconsistency loss:
    clean label y, clean prediction yhat, perturbed label a (geometric
    replay of the perturbation on y), perturbed prediction ahat."""

    y: Tensor
    yhat: Tensor
    a: Tensor
    ahat: Tensor

    def __post_init__(self):
        self.y = _as_tensor(self.y)
        self.yhat = _as_tensor(self.yhat)
        self.a = _as_tensor(self.a)
        self.ahat = _as_tensor(self.ahat)
        shape = self.y.data.shape
        for name in ("yhat", "a", "ahat"):
            other = getattr(self, name).data.shape
            if other != shape:
                raise ValueError(f"MaskQuartet: {name} shape {other} != y shape {shape}")
        _check_binary_tensor("MaskQuartet.y", self.y)
        _check_binary_tensor("MaskQuartet.a", self.a)
        _check_unit_range("MaskQuartet.yhat", self.yhat)
        _check_unit_range("MaskQuartet.ahat", self.ahat)


def jaccard_loss(y, p, smooth: float = DEFAULT_SMOOTH) -> Tensor:
    """1 - (sum(y*p) + s) / (sum(y + p - y*p) + s) for a binary label y
    and a probability map p."""
    yt = _constant(_as_tensor(y))
    pt = _as_tensor(p)
    if yt.data.shape != pt.data.shape:
        raise ValueError(f"jaccard_loss: shape mismatch {yt.data.shape} vs {pt.data.shape}")
    _check_binary_tensor("jaccard_loss.y", yt)
    _check_unit_range("jaccard_loss.p", pt)
    inter = reduce_sum(yt * pt)
    union = reduce_sum(yt + pt - yt * pt)
    return 1.0 - (inter + smooth) / (union + smooth)


def sil_loss(q: MaskQuartet, smooth: float = DEFAULT_SMOOTH) -> Tensor:
    """Segmentation inconsistency loss over a quartet: the smooth
    symmetric-difference mass divided by the smooth union mass.

    Only the denominator is smoothed, so an all-empty quartet yields 0.
    Gradients reach yhat and ahat only.
    """
    # Quartet construction already validated shapes and ranges; the
    # folds are called unchecked.
    args = [_constant(q.y), q.yhat, _constant(q.a), q.ahat]
    num = reduce_sum(_theta_fold(args))
    den = reduce_sum(_union_fold(args))
    if smooth == 0.0 and float(den.data) == 0.0:
        # Union empty means every input is exactly zero: nothing changed.
        return Tensor(0.0)
    return num / (den + smooth)


def label_free_sil(yhat, ahat, eps_of_yhat, smooth: float = DEFAULT_SMOOTH) -> Tensor:
    """Label-free variant: inconsistency of (yhat, ahat, eps(yhat)) where
    eps(yhat) is the geometric part of the sampled perturbation replayed
    on the clean prediction and treated as a constant.

    Note the odd-arity fold: with the identity perturbation and
    ahat == yhat binary, the numerator folds to yhat itself, so the loss
    is ~1 on non-empty predictions. That is a property of the 3-argument
    symmetric difference, not an error.
    """
    yh = _as_tensor(yhat)
    ah = _as_tensor(ahat)
    ey = _constant(_as_tensor(eps_of_yhat))
    for name, t in (("ahat", ah), ("eps_of_yhat", ey)):
        if t.data.shape != yh.data.shape:
            raise ValueError(f"label_free_sil: {name} shape {t.data.shape} != {yh.data.shape}")
    for name, t in (("yhat", yh), ("ahat", ah), ("eps_of_yhat", ey)):
        _check_unit_range(f"label_free_sil.{name}", t)
    args = [yh, ah, ey]
    num = reduce_sum(_theta_fold(args))
    den = reduce_sum(_union_fold(args))
    if smooth == 0.0 and float(den.data) == 0.0:
        return Tensor(0.0)
    return num / (den + smooth)


def combined_loss(l_seg: Tensor, l_sil: Tensor, iou_weight: float) -> Tensor:
    """Convex combination (1-w)*l_seg + w*l_sil with a constant weight w,
    the per-batch IoU of thresholded clean predictions."""
    w = float(iou_weight)
    if not (0.0 <= w <= 1.0):
        raise ValueError(f"combined_loss: weight {w} outside [0,1]")
    if w == 0.0:
        return l_seg
    if w == 1.0:
        return l_sil
    return (1.0 - w) * l_seg + w * l_sil
