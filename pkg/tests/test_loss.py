import numpy as np
import pytest

from segconsist.loss import MaskQuartet, combined_loss, jaccard_loss, label_free_sil, sil_loss
from segconsist.metrics import binary_inconsistency
from segconsist.tensor import Tensor, grad_check


def _random_binary(rng, shape):
    return (rng.random(shape) > 0.5).astype(float)


def test_jaccard_hand_case():
    y = np.array([[1.0, 1.0], [0.0, 0.0]])
    p = np.full((2, 2), 0.5)
    s = 1e-6
    expected = 1.0 - (1.0 + s) / (3.0 + s)
    assert jaccard_loss(Tensor(y), Tensor(p)).item() == pytest.approx(expected, abs=1e-12)


def test_jaccard_extremes():
    y = np.array([1.0, 0.0, 1.0, 0.0])
    perfect = jaccard_loss(Tensor(y), Tensor(y)).item()
    assert perfect == pytest.approx(0.0, abs=1e-6)
    opposite = jaccard_loss(Tensor(y), Tensor(1.0 - y)).item()
    assert opposite == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ValueError):
        jaccard_loss(Tensor(y), Tensor(np.zeros(3)))
    with pytest.raises(ValueError):
        jaccard_loss(Tensor(y * 0.5), Tensor(y))


def test_sil_zero_at_consistency():
    rng = np.random.default_rng(0)
    y = _random_binary(rng, (4, 4))
    a = _random_binary(rng, (4, 4))
    q = MaskQuartet(Tensor(y), Tensor(y), Tensor(a), Tensor(a))
    assert sil_loss(q).item() == pytest.approx(0.0, abs=1e-6)


def test_sil_matches_binary_inconsistency_hand_case():
    y = np.array([[1.0, 0.0], [0.0, 0.0]])
    ahat = np.array([[1.0, 1.0], [0.0, 0.0]])
    q = MaskQuartet(Tensor(y), Tensor(y.copy()), Tensor(y.copy()), Tensor(ahat))
    assert sil_loss(q, smooth=0.0).item() == 0.5
    assert sil_loss(q, smooth=0.0).item() == binary_inconsistency(y, y, y, ahat)


def test_sil_binary_equivalence_sampled():
    rng = np.random.default_rng(123)
    for _ in range(200):
        y, yh, a, ah = (_random_binary(rng, (3, 3)) for _ in range(4))
        q = MaskQuartet(Tensor(y), Tensor(yh), Tensor(a), Tensor(ah))
        assert sil_loss(q, smooth=0.0).item() == binary_inconsistency(y, a, yh, ah)


def test_sil_all_empty_quartet_is_zero():
    z = np.zeros((2, 2))
    q = MaskQuartet(Tensor(z), Tensor(z), Tensor(z), Tensor(z))
    assert sil_loss(q, smooth=0.0).item() == 0.0
    assert sil_loss(q).item() == 0.0


def test_sil_gradients_reach_predictions_only():
    rng = np.random.default_rng(5)
    y = Tensor(_random_binary(rng, (3, 3)), requires_grad=True)
    a = Tensor(_random_binary(rng, (3, 3)), requires_grad=True)
    yh = Tensor(rng.random((3, 3)) * 0.9 + 0.05, requires_grad=True)
    ah = Tensor(rng.random((3, 3)) * 0.9 + 0.05, requires_grad=True)
    sil_loss(MaskQuartet(y, yh, a, ah)).backward()
    assert y.grad is None and a.grad is None
    assert yh.grad is not None and ah.grad is not None


@pytest.mark.parametrize("seed", range(10))
def test_sil_gradient_check(seed):
    rng = np.random.default_rng(seed)
    y = _random_binary(rng, (3, 4))
    a = _random_binary(rng, (3, 4))
    ah = Tensor(rng.random((3, 4)) * 0.9 + 0.05)
    yh0 = rng.random((3, 4)) * 0.9 + 0.05

    def f(yh):
        return sil_loss(MaskQuartet(Tensor(y), yh, Tensor(a), ah))

    assert grad_check(f, Tensor(yh0)) < 1e-4

    ah0 = rng.random((3, 4)) * 0.9 + 0.05
    yh = Tensor(rng.random((3, 4)) * 0.9 + 0.05)

    def g(ahat):
        return sil_loss(MaskQuartet(Tensor(y), yh, Tensor(a), ahat))

    assert grad_check(g, Tensor(ah0)) < 1e-4


def test_label_free_identity_perturbation_folds_to_one():
    rng = np.random.default_rng(2)
    yh = _random_binary(rng, (4, 4))
    assert yh.sum() > 0
    # Odd-arity fold: theta(yh, yh, yh) == yh, so the ratio is ~1.
    val = label_free_sil(Tensor(yh), Tensor(yh.copy()), Tensor(yh.copy())).item()
    assert val == pytest.approx(1.0, abs=1e-5)


def test_label_free_all_zero_is_zero():
    z = np.zeros((3, 3))
    assert label_free_sil(Tensor(z), Tensor(z), Tensor(z), smooth=0.0).item() == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_label_free_gradient_check(seed):
    rng = np.random.default_rng(seed)
    ah = Tensor(rng.random((3, 3)) * 0.9 + 0.05)
    ey = Tensor(_random_binary(rng, (3, 3)))
    yh0 = rng.random((3, 3)) * 0.9 + 0.05
    err = grad_check(lambda yh: label_free_sil(yh, ah, ey), Tensor(yh0))
    assert err < 1e-4


def test_combined_loss_endpoints_and_midpoint():
    seg = Tensor(0.4, requires_grad=True) * 1.0
    sil = Tensor(0.2, requires_grad=True) * 1.0
    assert combined_loss(seg, sil, 0.0) is seg
    assert combined_loss(seg, sil, 1.0) is sil
    assert combined_loss(seg, sil, 0.5).item() == pytest.approx(0.3)
    with pytest.raises(ValueError):
        combined_loss(seg, sil, 1.5)


def test_combined_loss_monotone_in_each_argument():
    w = 0.3
    base = combined_loss(Tensor(0.4), Tensor(0.2), w).item()
    assert combined_loss(Tensor(0.5), Tensor(0.2), w).item() >= base
    assert combined_loss(Tensor(0.4), Tensor(0.3), w).item() >= base


def test_quartet_validation():
    y = Tensor(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        MaskQuartet(y, Tensor(np.zeros((2, 3))), y, y)
    with pytest.raises(ValueError):
        MaskQuartet(Tensor(np.full((2, 2), 0.5)), y, y, y)
    with pytest.raises(ValueError):
        MaskQuartet(y, Tensor(np.full((2, 2), 1.5)), y, y)
