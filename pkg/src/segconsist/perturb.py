"""Sampled, replayable perturbations applied in lockstep to images and
masks.

A pipeline invocation either returns the identity (with probability
1 - apply_probability) or samples concrete parameters for every enabled
transform. The sampled record splits into a geometric part (flips,
quarter rotations, radial distortion) that applies to both image and
mask, and a photometric part (noise, compression surrogate, color
jitter) that applies to the image only. Replaying a sampled record is
bit-exact: the noise field is regenerated from a stored seed.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from . import imageops as ops

__all__ = ["PerturbationSpec", "AppliedPerturbation", "sample", "apply_to_image", "apply_to_mask"]

# Documented parameter ceilings; specs outside these are configuration
# errors, not requests for stronger augmentation.
MAX_NOISE_VAR = 0.01
MAX_JITTER_DELTA = 0.2
MAX_DISTORT_LIMIT = 10.0
QUALITY_RANGE = (10, 100)


@dataclass
class PerturbationSpec:
    """Enable flags and parameter ranges for one perturbation pipeline."""

    flip: bool = True
    rotate90: bool = True
    gaussian_noise: bool = True
    noise_var_max: float = MAX_NOISE_VAR
    compression: bool = True
    quality_min: int = QUALITY_RANGE[0]
    quality_max: int = QUALITY_RANGE[1]
    optical_distortion: bool = True
    distort_limit: float = MAX_DISTORT_LIMIT
    color_jitter: bool = True
    brightness: float = MAX_JITTER_DELTA
    contrast: float = MAX_JITTER_DELTA
    saturation: float = MAX_JITTER_DELTA
    hue: float = MAX_JITTER_DELTA
    apply_probability: float = 0.5

    def __post_init__(self):
        if not (0.0 <= self.apply_probability <= 1.0):
            raise ValueError(f"apply_probability {self.apply_probability} outside [0,1]")
        if not (0.0 <= self.noise_var_max <= MAX_NOISE_VAR):
            raise ValueError(f"noise_var_max {self.noise_var_max} outside [0, {MAX_NOISE_VAR}]")
        if not (QUALITY_RANGE[0] <= self.quality_min <= self.quality_max <= QUALITY_RANGE[1]):
            raise ValueError(f"quality range [{self.quality_min}, {self.quality_max}] invalid")
        if not (0.0 <= self.distort_limit <= MAX_DISTORT_LIMIT):
            raise ValueError(f"distort_limit {self.distort_limit} outside [0, {MAX_DISTORT_LIMIT}]")
        for name in ("brightness", "contrast", "saturation", "hue"):
            v = getattr(self, name)
            if not (0.0 <= v <= MAX_JITTER_DELTA):
                raise ValueError(f"{name} delta {v} outside [0, {MAX_JITTER_DELTA}]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PerturbationSpec":
        return cls(**d)


@dataclass(frozen=True)
class AppliedPerturbation:
    """Concrete parameters of one sampled pipeline invocation. Zeroed /
    disabled fields mean the corresponding transform is a no-op."""

    flip_h: bool = False
    flip_v: bool = False
    rot_k: int = 0
    distortion: float = 0.0
    noise_var: float = 0.0
    noise_seed: int = 0
    quality: int | None = None
    brightness: float = 0.0
    contrast: float = 0.0
    saturation: float = 0.0
    hue: float = 0.0

    @property
    def is_identity(self) -> bool:
        return self == AppliedPerturbation()

    @property
    def is_geometric_identity(self) -> bool:
        return not (self.flip_h or self.flip_v or self.rot_k or self.distortion)

    def geometric_only(self) -> "AppliedPerturbation":
        return replace(
            self, noise_var=0.0, noise_seed=0, quality=None,
            brightness=0.0, contrast=0.0, saturation=0.0, hue=0.0,
        )


def sample(spec: PerturbationSpec, rng_seed) -> AppliedPerturbation:
    """Draw one pipeline invocation. With probability
    1 - apply_probability the identity is returned; otherwise every
    enabled transform gets concrete parameters."""
    rng = np.random.default_rng(rng_seed)
    if rng.random() >= spec.apply_probability:
        return AppliedPerturbation()

    kwargs = {}
    if spec.flip:
        kwargs["flip_h"] = bool(rng.random() < 0.5)
        kwargs["flip_v"] = bool(rng.random() < 0.5)
    if spec.rotate90:
        kwargs["rot_k"] = int(rng.integers(0, 4))
    if spec.optical_distortion:
        lam_max = spec.distort_limit / 100.0
        kwargs["distortion"] = float(rng.uniform(-lam_max, lam_max))
    if spec.gaussian_noise:
        kwargs["noise_var"] = float(rng.uniform(0.0, spec.noise_var_max))
        kwargs["noise_seed"] = int(rng.integers(0, 2**31))
    if spec.compression:
        kwargs["quality"] = int(rng.integers(spec.quality_min, spec.quality_max + 1))
    if spec.color_jitter:
        kwargs["brightness"] = float(rng.uniform(-spec.brightness, spec.brightness))
        kwargs["contrast"] = float(rng.uniform(-spec.contrast, spec.contrast))
        kwargs["saturation"] = float(rng.uniform(-spec.saturation, spec.saturation))
        kwargs["hue"] = float(rng.uniform(-spec.hue, spec.hue))
    return AppliedPerturbation(**kwargs)


def _apply_geometric_planes(p: AppliedPerturbation, planes: np.ndarray, mask_mode: bool) -> np.ndarray:
    """Flips, quarter rotations, then radial distortion on [C, H, W]."""
    out = planes
    if p.flip_h:
        out = out[:, :, ::-1]
    if p.flip_v:
        out = out[:, ::-1, :]
    if p.rot_k % 4:
        if p.rot_k % 2 == 1 and out.shape[1] != out.shape[2]:
            raise ValueError("odd quarter rotation requires a square image")
        out = np.rot90(out, k=p.rot_k, axes=(1, 2))
    out = np.ascontiguousarray(out)
    if p.distortion != 0.0:
        ys, xs = ops.radial_source_grid(out.shape[1], out.shape[2], p.distortion)
        if mask_mode:
            out = np.stack([ops.nearest_sample(c, ys, xs) for c in out])
        else:
            out = ops.bilinear_sample(out, ys, xs)
    return out


def apply_to_image(p: AppliedPerturbation, img) -> np.ndarray:
    """Replay a sampled perturbation on a [3, H, W] image in [0,1]:
    geometric first, then photometric, clamped back to [0,1]."""
    arr = np.asarray(getattr(img, "data", img), dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise ValueError(f"apply_to_image: expected [3,H,W], got {arr.shape}")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("apply_to_image: image values outside [0,1]")
    out = _apply_geometric_planes(p, arr, mask_mode=False)
    if p.is_identity:
        return out

    if p.noise_var > 0.0:
        noise_rng = np.random.default_rng(p.noise_seed)
        out = ops.clip01(out + noise_rng.normal(0.0, np.sqrt(p.noise_var), out.shape))
    if p.quality is not None and p.quality < 100:
        out = _compress_surrogate(out, p.quality)
    if p.brightness or p.contrast or p.saturation or p.hue:
        out = ops.adjust_brightness(out, 1.0 + p.brightness)
        out = ops.adjust_contrast(out, 1.0 + p.contrast)
        out = ops.adjust_saturation(out, 1.0 + p.saturation)
        out = ops.hue_rotate(out, p.hue)
    return ops.clip01(out)


def apply_to_mask(p: AppliedPerturbation, mask) -> np.ndarray:
    """Replay only the geometric component on a binary [H, W] mask with
    nearest-neighbor resampling; photometric parts never touch labels."""
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ValueError(f"apply_to_mask: expected [H,W], got {arr.shape}")
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError("apply_to_mask: mask must be strictly binary")
    out = _apply_geometric_planes(p, arr[None].astype(np.float64), mask_mode=True)[0]
    return (out > 0.5).astype(np.uint8)


def _compress_surrogate(img: np.ndarray, quality: int) -> np.ndarray:
    """Blocky information loss without a codec: box-downscale by a
    quality-derived factor, nearest-upscale back, quantize intensities.
    Quality 100 is handled by the caller as an exact identity."""
    _, h, w = img.shape
    s = int(round(1 + (100 - quality) / 30.0))
    levels = max(8, int(round(256 * quality / 100.0)))
    out = img
    if s > 1:
        out = np.stack(
            [ops.nearest_upscale(ops.box_downscale(c, s), s, h, w) for c in out]
        )
    out = np.round(out * (levels - 1)) / (levels - 1)
    return ops.clip01(out)
