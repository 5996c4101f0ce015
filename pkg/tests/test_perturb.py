import numpy as np
import pytest

from segconsist.imageops import nearest_sample, radial_source_grid
from segconsist.metrics import iou
from segconsist.perturb import (
    AppliedPerturbation,
    PerturbationSpec,
    apply_to_image,
    apply_to_mask,
    sample,
)


@pytest.fixture
def image():
    rng = np.random.default_rng(0)
    base = rng.random((3, 64, 64)) * 0.5 + 0.25
    return base


@pytest.fixture
def disk_mask():
    yy, xx = np.mgrid[0:64, 0:64]
    return (((yy - 31.5) ** 2 + (xx - 31.5) ** 2) <= 20**2).astype(np.uint8)


def test_sample_determinism():
    spec = PerturbationSpec(apply_probability=1.0)
    assert sample(spec, 1234) == sample(spec, 1234)
    assert sample(spec, 1234) != sample(spec, 1235)


def test_apply_probability_zero_is_identity():
    spec = PerturbationSpec(apply_probability=0.0)
    for seed in range(50):
        assert sample(spec, seed).is_identity


def test_rotation_sampling_is_uniform():
    spec = PerturbationSpec(apply_probability=1.0)
    counts = np.zeros(4)
    n = 10_000
    for seed in range(n):
        counts[sample(spec, seed).rot_k] += 1
    # binomial 3-sigma band around 0.25
    sigma = np.sqrt(0.25 * 0.75 / n)
    assert np.all(np.abs(counts / n - 0.25) < 3 * sigma)


def test_identity_applies_as_noop(image, disk_mask):
    p = AppliedPerturbation()
    assert np.array_equal(apply_to_image(p, image), image)
    assert np.array_equal(apply_to_mask(p, disk_mask), disk_mask)


def test_replay_is_bit_exact(image, disk_mask):
    spec = PerturbationSpec(apply_probability=1.0)
    p = sample(spec, 99)
    out1 = apply_to_image(p, image)
    out2 = apply_to_image(p, image)
    assert np.array_equal(out1, out2)
    assert np.array_equal(apply_to_mask(p, disk_mask), apply_to_mask(p, disk_mask))


def test_rot180_is_involution(image):
    p = AppliedPerturbation(rot_k=2)
    assert np.array_equal(apply_to_image(p, apply_to_image(p, image)), image)


def test_odd_rotation_requires_square():
    p = AppliedPerturbation(rot_k=1)
    with pytest.raises(ValueError):
        apply_to_image(p, np.zeros((3, 4, 6)))
    # even rotation is fine on rectangles
    apply_to_image(AppliedPerturbation(rot_k=2), np.zeros((3, 4, 6)))


def test_gaussian_noise_mean_absolute_change():
    # half-normal mean: E|N(0, v)| = sqrt(2v/pi)
    img = np.full((3, 64, 64), 0.5)
    p = AppliedPerturbation(noise_var=0.01, noise_seed=42)
    change = np.abs(apply_to_image(p, img) - img).mean()
    assert change == pytest.approx(np.sqrt(2 * 0.01 / np.pi), abs=0.005)


def test_photometric_only_leaves_mask_unchanged(disk_mask):
    p = AppliedPerturbation(noise_var=0.01, noise_seed=1, quality=40, brightness=0.1, hue=0.15)
    assert np.array_equal(apply_to_mask(p, disk_mask), disk_mask)


def test_geometric_partition_matches_explicit_split(image, disk_mask):
    p = sample(PerturbationSpec(apply_probability=1.0), 7)
    geo = p.geometric_only()
    assert np.array_equal(apply_to_mask(p, disk_mask), apply_to_mask(geo, disk_mask))


def test_flips_preserve_positive_count_and_pairing(image, disk_mask):
    p = AppliedPerturbation(flip_h=True, flip_v=True, rot_k=3)
    m = apply_to_mask(p, disk_mask)
    assert m.sum() == disk_mask.sum()
    # image and mask transform in lockstep: a mask-derived image keeps IoU 1
    mask_img = np.repeat(disk_mask[None].astype(float), 3, axis=0)
    img_out = apply_to_image(p, mask_img)
    assert iou((img_out[0] > 0.5).astype(np.uint8), m) == 1.0


def test_zero_distortion_is_identity(image, disk_mask):
    p = AppliedPerturbation(distortion=0.0, flip_h=False)
    assert np.array_equal(apply_to_mask(p, disk_mask), disk_mask)
    ys, xs = radial_source_grid(64, 64, 0.0)
    assert np.array_equal(nearest_sample(disk_mask.astype(float), ys, xs), disk_mask)


def test_distortion_preserves_positive_count_within_tolerance(disk_mask):
    for lam in (-0.1, -0.05, 0.05, 0.1):
        m = apply_to_mask(AppliedPerturbation(distortion=lam), disk_mask)
        assert abs(int(m.sum()) - int(disk_mask.sum())) <= 0.05 * disk_mask.sum()


def test_compression_quality_monotone(image):
    changes = []
    for q in (10, 40, 70, 100):
        out = apply_to_image(AppliedPerturbation(quality=q), image)
        changes.append(np.abs(out - image).mean())
    assert changes[-1] == 0.0  # quality 100 is the identity
    assert all(a >= b for a, b in zip(changes, changes[1:]))


def test_spec_validation():
    with pytest.raises(ValueError):
        PerturbationSpec(apply_probability=1.5)
    with pytest.raises(ValueError):
        PerturbationSpec(noise_var_max=0.5)
    with pytest.raises(ValueError):
        PerturbationSpec(quality_min=5)
    with pytest.raises(ValueError):
        PerturbationSpec(hue=0.5)
    round_trip = PerturbationSpec.from_dict(PerturbationSpec().to_dict())
    assert round_trip == PerturbationSpec()


def test_image_range_validation(image):
    with pytest.raises(ValueError):
        apply_to_image(AppliedPerturbation(), image * 2.0)
    with pytest.raises(ValueError):
        apply_to_mask(AppliedPerturbation(), image[0] * 0.5)
