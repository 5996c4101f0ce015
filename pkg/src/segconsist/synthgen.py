"""Deterministic synthetic binary-segmentation environments.

Each sample is a square RGB image of 1 to 3 textured elliptical blobs on
a textured background, with the mask marking exactly the rasterized blob
union. One in-distribution environment supplies the train/val/test
split; three shifted environments (color, noise+vignette, blob shape and
texture) stand in for out-of-distribution test sets.

Every image draws from its own spawned RNG stream keyed by (seed, salt,
index), so environments are bit-wise independent: editing one shifted
environment's parameters can never change another environment's pixels.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import imageops as ops
from . import pixmap

__all__ = [
    "EnvironmentSpec",
    "SampleRecord",
    "generate",
    "standard_specs",
    "standard_suite",
    "split_sizes",
    "save_suite",
    "load_suite",
]

MANIFEST_NAME = "manifest.json"
_ENV_SALTS = {"id": 0, "ood_color": 1, "ood_noise": 2, "ood_shape": 3}


@dataclass
class EnvironmentSpec:
    name: str
    image_size: int = 64
    n_images: int = 100
    blob_count: tuple[int, int] = (1, 3)
    blob_radius: tuple[float, float] = (6.0, 14.0)
    fg_color: tuple[float, float, float] = (0.80, 0.33, 0.30)
    fg_speckle: float = 0.05
    bg_color: tuple[float, float, float] = (0.32, 0.45, 0.58)
    bg_speckle: float = 0.05
    # Shift descriptors; all neutral by default.
    hue_shift: float = 0.0
    contrast_scale: float = 1.0
    noise_var: float = 0.0
    eccentricity_scale: float = 1.0
    vignette_strength: float = 0.0

    def max_blob_margin(self) -> int:
        # Semi-major axis bound given the eccentricity aspect range.
        aspect = 1.0 + 0.3 * self.eccentricity_scale
        return int(math.ceil(self.blob_radius[1] * math.sqrt(aspect))) + 1

    def __post_init__(self):
        if 2 * self.max_blob_margin() >= self.image_size:
            raise ValueError(
                f"{self.name}: blob radius up to {self.blob_radius[1]} cannot fit "
                f"in a {self.image_size}px image"
            )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EnvironmentSpec":
        d = dict(d)
        for key in ("blob_count", "blob_radius", "fg_color", "bg_color"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass
class SampleRecord:
    image: np.ndarray  # [3, H, W] float64 in [0,1]
    mask: np.ndarray  # [H, W] uint8
    environment: str
    index: int
    seed: tuple


def _coarse_texture(rng, size: int, block: int = 8) -> np.ndarray:
    nb = -(-size // block)
    coarse = rng.normal(0.0, 1.0, (3, nb, nb))
    return np.kron(coarse, np.ones((1, block, block)))[:, :size, :size]


def _render(spec: EnvironmentSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    size = spec.image_size
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)

    img = np.asarray(spec.bg_color)[:, None, None] + spec.bg_speckle * _coarse_texture(rng, size)
    img = img + rng.normal(0.0, spec.bg_speckle * 0.5, (3, size, size))

    mask = np.zeros((size, size), dtype=bool)
    n_blobs = int(rng.integers(spec.blob_count[0], spec.blob_count[1] + 1))
    for _ in range(n_blobs):
        r = rng.uniform(*spec.blob_radius)
        aspect = rng.uniform(1.0, 1.0 + 0.3 * spec.eccentricity_scale)
        rx = r * math.sqrt(aspect)
        ry = r / math.sqrt(aspect)
        angle = rng.uniform(0.0, math.pi)
        margin = int(math.ceil(max(rx, ry))) + 1
        cx = rng.uniform(margin, size - 1 - margin)
        cy = rng.uniform(margin, size - 1 - margin)
        ca, sa = math.cos(angle), math.sin(angle)
        u = (xx - cx) * ca + (yy - cy) * sa
        v = -(xx - cx) * sa + (yy - cy) * ca
        mask |= (u / rx) ** 2 + (v / ry) ** 2 <= 1.0

    fg = np.asarray(spec.fg_color)[:, None, None] + spec.fg_speckle * _coarse_texture(rng, size)
    fg = fg + rng.normal(0.0, spec.fg_speckle * 0.5, (3, size, size))
    img = np.where(mask[None], fg, img)

    if spec.contrast_scale != 1.0:
        img = ops.adjust_contrast(img, spec.contrast_scale, pivot=0.5)
    if spec.hue_shift:
        img = ops.hue_rotate(img, spec.hue_shift)
    if spec.vignette_strength:
        img = ops.vignette(img, spec.vignette_strength)
    if spec.noise_var:
        img = img + rng.normal(0.0, math.sqrt(spec.noise_var), (3, size, size))

    return ops.clip01(img), mask.astype(np.uint8)


def generate(spec: EnvironmentSpec, seed) -> list[SampleRecord]:
    """Render ``spec.n_images`` samples, one spawned RNG stream each."""
    entropy = tuple(int(s) for s in seed) if isinstance(seed, (tuple, list)) else (int(seed),)
    children = np.random.SeedSequence(entropy).spawn(spec.n_images)
    records = []
    for i, child in enumerate(children):
        img, mask = _render(spec, np.random.default_rng(child))
        records.append(SampleRecord(img, mask, spec.name, i, entropy + (i,)))
    return records


def standard_specs(image_size: int = 64, n_id: int = 120, n_ood: int = 24) -> dict[str, EnvironmentSpec]:
    """The default environment family: one in-distribution spec plus the
    three fixed shifts."""
    base = EnvironmentSpec(name="id", image_size=image_size, n_images=n_id)
    return {
        "id": base,
        "ood_color": replace(base, name="ood_color", n_images=n_ood, hue_shift=0.30, contrast_scale=0.80),
        "ood_noise": replace(base, name="ood_noise", n_images=n_ood, noise_var=0.02, vignette_strength=0.45),
        "ood_shape": replace(
            base,
            name="ood_shape",
            n_images=n_ood,
            eccentricity_scale=2.2,
            blob_radius=(4.0, 10.0),
            fg_color=(0.85, 0.52, 0.24),
            fg_speckle=0.12,
        ),
    }


def split_sizes(n: int) -> tuple[int, int, int]:
    """80/10/10 split of the in-distribution pool."""
    train = round(0.8 * n)
    val = round(0.1 * n)
    return train, val, n - train - val


def standard_suite(seed, image_size: int = 64, n_id: int = 120, n_ood: int = 24) -> dict[str, list[SampleRecord]]:
    """Generate the full experiment suite: train/val/test_id from the
    in-distribution spec (80/10/10) plus the three shifted test
    environments."""
    specs = standard_specs(image_size, n_id, n_ood)
    pool = generate(specs["id"], [int(seed), _ENV_SALTS["id"]])
    n_train, n_val, _ = split_sizes(n_id)
    suite = {
        "train": [replace(r, environment="train") for r in pool[:n_train]],
        "val": [replace(r, environment="val") for r in pool[n_train : n_train + n_val]],
        "test_id": [replace(r, environment="test_id") for r in pool[n_train + n_val :]],
    }
    for name in ("ood_color", "ood_noise", "ood_shape"):
        suite[name] = generate(specs[name], [int(seed), _ENV_SALTS[name]])
    return suite


def save_suite(suite: dict[str, list[SampleRecord]], out_dir, seed, specs=None) -> Path:
    """Write every environment as P6/P5 files plus a JSON manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"format_version": 1, "seed": int(seed), "environments": []}
    if specs is None:
        specs = {}
    for name, records in suite.items():
        env_dir = out / name
        env_dir.mkdir(exist_ok=True)
        images, masks = [], []
        for rec in records:
            img_rel = f"{name}/img_{rec.index:04d}.ppm"
            msk_rel = f"{name}/msk_{rec.index:04d}.pgm"
            pixmap.write_ppm(out / img_rel, rec.image)
            pixmap.write_pgm(out / msk_rel, rec.mask)
            images.append(img_rel)
            masks.append(msk_rel)
        entry = {"name": name, "count": len(records), "images": images, "masks": masks}
        if name in specs:
            entry["spec"] = specs[name].to_dict()
        manifest["environments"].append(entry)
    manifest_path = out / MANIFEST_NAME
    manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return manifest_path


def load_suite(data_dir) -> dict[str, list[SampleRecord]]:
    """Read a saved suite back into SampleRecords (8-bit quantized)."""
    root = Path(data_dir)
    manifest = json.loads((root / MANIFEST_NAME).read_text())
    seed = manifest["seed"]
    suite: dict[str, list[SampleRecord]] = {}
    for entry in manifest["environments"]:
        records = []
        for i, (img_rel, msk_rel) in enumerate(zip(entry["images"], entry["masks"])):
            img = pixmap.read_ppm(root / img_rel)
            mask = pixmap.read_pgm(root / msk_rel)
            records.append(SampleRecord(img, mask, entry["name"], i, (seed, i)))
        suite[entry["name"]] = records
    return suite
