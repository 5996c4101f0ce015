"""Smooth set operators on [0,1]-valued tensors.

The differentiable counterparts of symmetric difference, union, and
intersection under the product norm:

    theta(a, b) = a(1-b) + b(1-a)
    union(a, b) = a + b - ab
    inter(a, b) = ab

On strictly binary inputs each operator agrees exactly with its crisp
set equivalent. The n-ary forms are left folds of the binary forms; all
three binary forms are associative and commutative on [0,1], so the
folds are permutation invariant (verified by the property tests rather
than assumed).

When no argument participates in a gradient graph, the folds run on the
raw arrays with the identical sequence of float operations, skipping the
per-op tensor bookkeeping. Both paths produce bit-identical values.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor

__all__ = ["soft_symmetric_difference", "soft_union", "soft_intersection"]

# Absorbs float noise from upstream sigmoids when validating the [0,1]
# input domain.
RANGE_TOL = 1e-9


def _check_args(name: str, args) -> list[Tensor]:
    if len(args) < 2:
        raise ValueError(f"{name}: needs at least 2 arguments, got {len(args)}")
    out = []
    shape = None
    for a in args:
        t = a if isinstance(a, Tensor) else Tensor(a)
        if shape is None:
            shape = t.data.shape
        elif t.data.shape != shape:
            raise ValueError(f"{name}: shape mismatch {t.data.shape} vs {shape}")
        lo = t.data.min(initial=0.0)
        hi = t.data.max(initial=1.0)
        if lo < -RANGE_TOL or hi > 1.0 + RANGE_TOL:
            raise ValueError(f"{name}: values outside [0,1] (min {lo}, max {hi})")
        out.append(t)
    return out


def _theta_fold(ts: list[Tensor]) -> Tensor:
    if not any(t.requires_grad for t in ts):
        acc = ts[0].data
        for t in ts[1:]:
            d = t.data
            acc = acc * (1.0 - d) + d * (1.0 - acc)
        return Tensor(acc)
    acc = ts[0]
    for t in ts[1:]:
        acc = acc * (1.0 - t) + t * (1.0 - acc)
    return acc


def _union_fold(ts: list[Tensor]) -> Tensor:
    # Complement-product form so the De Morgan identity against
    # soft_intersection holds bit-exactly, not just to rounding.
    if not any(t.requires_grad for t in ts):
        acc = ts[0].data
        for t in ts[1:]:
            acc = 1.0 - (1.0 - acc) * (1.0 - t.data)
        return Tensor(acc)
    acc = ts[0]
    for t in ts[1:]:
        acc = 1.0 - (1.0 - acc) * (1.0 - t)
    return acc


def _intersection_fold(ts: list[Tensor]) -> Tensor:
    if not any(t.requires_grad for t in ts):
        acc = ts[0].data
        for t in ts[1:]:
            acc = acc * t.data
        return Tensor(acc)
    acc = ts[0]
    for t in ts[1:]:
        acc = acc * t
    return acc


def soft_symmetric_difference(*args) -> Tensor:
    """Left fold of theta(a, b) = a(1-b) + b(1-a) over two or more
    same-shape tensors with values in [0,1].

    Reduces to the elementwise XOR chain on binary inputs.
    """
    return _theta_fold(_check_args("soft_symmetric_difference", args))


def soft_union(*args) -> Tensor:
    """Left fold of a + b - ab, equivalent to 1 - prod(1 - a_i)."""
    return _union_fold(_check_args("soft_union", args))


def soft_intersection(*args) -> Tensor:
    """Elementwise product of all arguments."""
    return _intersection_fold(_check_args("soft_intersection", args))
