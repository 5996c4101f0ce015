import numpy as np
import pytest

from segconsist.metrics import (
    binary_consistency,
    binary_inconsistency,
    border_artifact_rate,
    iou,
    threshold,
)
from segconsist.tensor import Tensor


def test_threshold_strict_rule():
    assert np.array_equal(threshold(np.array([0.4, 0.6]), 0.5), [0, 1])
    assert np.array_equal(threshold(np.array([0.5]), 0.5), [0])
    assert np.array_equal(threshold(np.zeros((3, 3)), 0.5), np.zeros((3, 3)))
    assert np.array_equal(threshold(Tensor([0.2, 0.9])), [0, 1])
    with pytest.raises(ValueError):
        threshold(np.array([0.5]), 1.0)
    with pytest.raises(ValueError):
        threshold(np.array([1.5]), 0.5)


def test_iou_counting():
    y = np.zeros((4, 4), dtype=np.uint8)
    y[0, :4] = 1
    p = np.zeros((4, 4), dtype=np.uint8)
    p[0, 2:] = 1
    p[1, :2] = 1
    # 4 positives each, overlap 2 -> 2/6
    assert iou(y, p) == pytest.approx(1 / 3)
    assert iou(y, y) == 1.0
    assert iou(np.zeros((2, 2)), np.zeros((2, 2))) == 1.0
    disjoint = 1 - y
    assert iou(y, disjoint) == 0.0
    assert iou(y, p) == iou(p, y)
    with pytest.raises(ValueError):
        iou(y, np.zeros((2, 2)))
    with pytest.raises(ValueError):
        iou(y.astype(float) * 0.5, y)


def test_inconsistency_hand_case():
    y = np.array([[1, 0], [0, 0]], dtype=np.uint8)
    yhat = y.copy()
    a = y.copy()
    ahat = np.array([[1, 1], [0, 0]], dtype=np.uint8)
    assert binary_inconsistency(y, a, yhat, ahat) == 0.5
    assert binary_consistency(y, a, yhat, ahat) == 0.5


def test_inconsistency_degenerate_and_perfect():
    y = np.array([[1, 0], [1, 0]], dtype=np.uint8)
    a = np.array([[0, 1], [0, 1]], dtype=np.uint8)
    assert binary_inconsistency(y, a, y, a) == 0.0
    assert binary_consistency(y, a, y, a) == 1.0
    z = np.zeros((2, 2), dtype=np.uint8)
    assert binary_inconsistency(z, z, z, z) == 0.0
    assert binary_consistency(z, z, z, z) == 1.0


def test_complement_on_random_quartets():
    rng = np.random.default_rng(42)
    for _ in range(250):
        masks = (rng.random((4, 3, 3)) > 0.5).astype(np.uint8)
        c = binary_consistency(*masks)
        cbar = binary_inconsistency(*masks)
        assert c + cbar == 1.0


def test_metrics_invariant_under_shared_permutation():
    rng = np.random.default_rng(9)
    masks = (rng.random((4, 16)) > 0.5).astype(np.uint8)
    perm = rng.permutation(16)
    before = binary_inconsistency(*masks)
    after = binary_inconsistency(*(m[perm] for m in masks))
    assert before == after
    assert iou(masks[0], masks[1]) == iou(masks[0][perm], masks[1][perm])


def test_border_artifact_rate():
    assert border_artifact_rate(np.zeros((6, 6), dtype=np.uint8), 1) == 0.0
    assert border_artifact_rate(np.ones((6, 6), dtype=np.uint8), 1) == 1.0
    center = np.zeros((4, 4), dtype=np.uint8)
    center[1:3, 1:3] = 1
    assert border_artifact_rate(center, 1) == 0.0
    with pytest.raises(ValueError):
        border_artifact_rate(center, 2)
    with pytest.raises(ValueError):
        border_artifact_rate(center, 0)
