"""Pixel-level helpers shared by the perturbation model and the
synthetic data generator. Images are float64 [3, H, W] in [0,1]; masks
are [H, W] and strictly binary."""

from __future__ import annotations

import numpy as np

# RGB <-> YIQ, the NTSC luma/chroma basis. Hue rotation is a rotation of
# the IQ chroma plane, which keeps the transform linear in RGB.
_RGB_TO_YIQ = np.array(
    [
        [0.299, 0.587, 0.114],
        [0.595716, -0.274453, -0.321263],
        [0.211456, -0.522591, 0.311135],
    ]
)
_YIQ_TO_RGB = np.linalg.inv(_RGB_TO_YIQ)

_LUMA = np.array([0.299, 0.587, 0.114])


def clip01(img: np.ndarray) -> np.ndarray:
    return np.clip(img, 0.0, 1.0)


def hue_rotate(img: np.ndarray, turns: float) -> np.ndarray:
    """Rotate hue by ``turns`` of a full revolution (approximate: a
    linear rotation of the YIQ chroma plane, not an HSV remap)."""
    if turns == 0.0:
        return img
    angle = 2.0 * np.pi * turns
    c, s = np.cos(angle), np.sin(angle)
    rot = np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    m = _YIQ_TO_RGB @ rot @ _RGB_TO_YIQ
    return np.tensordot(m, img, axes=([1], [0]))


def grayscale(img: np.ndarray) -> np.ndarray:
    return np.tensordot(_LUMA, img, axes=([0], [0]))


def adjust_brightness(img: np.ndarray, factor: float) -> np.ndarray:
    return img * factor


def adjust_contrast(img: np.ndarray, factor: float, pivot: float | None = None) -> np.ndarray:
    """Scale deviations from ``pivot``; defaults to the image's mean
    gray level, matching the usual photographic definition."""
    if pivot is None:
        pivot = float(grayscale(img).mean())
    return (img - pivot) * factor + pivot


def adjust_saturation(img: np.ndarray, factor: float) -> np.ndarray:
    gray = grayscale(img)[None, :, :]
    return gray + (img - gray) * factor


def vignette(img: np.ndarray, strength: float) -> np.ndarray:
    """Darken toward the corners with a quadratic radial falloff."""
    if strength == 0.0:
        return img
    _, h, w = img.shape
    yy, xx = np.mgrid[0:h, 0:w]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    r2 = ((yy - cy) / cy) ** 2 + ((xx - cx) / cx) ** 2
    return img * (1.0 - strength * r2 / 2.0)


def box_downscale(plane: np.ndarray, s: int) -> np.ndarray:
    """Average s x s blocks, edge-padding to a multiple of s."""
    h, w = plane.shape
    hp = -h % s
    wp = -w % s
    if hp or wp:
        plane = np.pad(plane, ((0, hp), (0, wp)), mode="edge")
    hh, ww = plane.shape
    return plane.reshape(hh // s, s, ww // s, s).mean(axis=(1, 3))


def nearest_upscale(plane: np.ndarray, s: int, h: int, w: int) -> np.ndarray:
    up = np.repeat(np.repeat(plane, s, axis=0), s, axis=1)
    return up[:h, :w]


def radial_source_grid(h: int, w: int, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Source coordinates implementing r_src = r(1 + lam r^2) with the
    radius normalized to half the shorter side; sampling an image at
    these coordinates applies the radial distortion."""
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    norm = min(cy, cx)
    dy = (yy - cy) / norm
    dx = (xx - cx) / norm
    r2 = dy * dy + dx * dx
    scale = 1.0 + lam * r2
    return cy + dy * scale * norm, cx + dx * scale * norm


def bilinear_sample(img: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Sample [C, H, W] channels at float coords, clamping to the edge."""
    _, h, w = img.shape
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = ys - y0
    fx = xs - x0
    top = img[:, y0, x0] * (1 - fx) + img[:, y0, x1] * fx
    bot = img[:, y1, x0] * (1 - fx) + img[:, y1, x1] * fx
    return top * (1 - fy) + bot * fy


def nearest_sample(plane: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    yi = np.clip(np.rint(ys).astype(int), 0, h - 1)
    xi = np.clip(np.rint(xs).astype(int), 0, w - 1)
    return plane[yi, xi]
