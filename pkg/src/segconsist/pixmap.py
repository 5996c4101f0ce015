"""Plain portable pixmap/graymap io (P6/P3 images, P5/P2 masks).

Images round-trip through 8-bit channels; masks are written as 0/255
and read back through a >127 threshold. maxval must be 255.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

__all__ = ["write_ppm", "read_ppm", "write_pgm", "read_pgm"]


def _to_bytes01(arr: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)


def write_ppm(path, img: np.ndarray, binary: bool = True) -> None:
    """Write a [3, H, W] float image in [0,1] as P6 (or P3) maxval 255."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[0] != 3:
        raise ValueError(f"write_ppm: expected [3,H,W], got {img.shape}")
    _, h, w = img.shape
    raster = _to_bytes01(img).transpose(1, 2, 0)  # H, W, C
    path = Path(path)
    if binary:
        with open(path, "wb") as f:
            f.write(f"P6\n{w} {h}\n255\n".encode())
            f.write(raster.tobytes())
    else:
        lines = [" ".join(str(v) for v in row) for row in raster.reshape(h, w * 3)]
        path.write_text("P3\n" + f"{w} {h}\n255\n" + "\n".join(lines) + "\n")


def write_pgm(path, mask: np.ndarray, binary: bool = True) -> None:
    """Write a binary [H, W] mask as P5 (or P2), 0/255, maxval 255."""
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError(f"write_pgm: expected [H,W], got {mask.shape}")
    if not np.all((mask == 0) | (mask == 1)):
        raise ValueError("write_pgm: mask must be strictly binary")
    h, w = mask.shape
    raster = (mask * 255).astype(np.uint8)
    path = Path(path)
    if binary:
        with open(path, "wb") as f:
            f.write(f"P5\n{w} {h}\n255\n".encode())
            f.write(raster.tobytes())
    else:
        lines = [" ".join(str(v) for v in row) for row in raster]
        path.write_text("P2\n" + f"{w} {h}\n255\n" + "\n".join(lines) + "\n")


def _read_header(data: bytes, n_tokens: int) -> tuple[list[int], int]:
    """Parse whitespace/comment-separated header tokens; return the
    integer tokens after the magic and the offset of the raster."""
    tokens: list[int] = []
    i = 2  # past the magic
    while len(tokens) < n_tokens:
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if i < len(data) and data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
            continue
        j = i
        while j < len(data) and not data[j : j + 1].isspace():
            j += 1
        if j == i:
            raise ValueError("truncated pixmap header")
        tokens.append(int(data[i:j]))
        i = j
    return tokens, i + 1  # single whitespace after maxval


def read_ppm(path) -> np.ndarray:
    """Read P6 or P3 into a float64 [3, H, W] array in [0,1]."""
    data = Path(path).read_bytes()
    magic = data[:2]
    if magic not in (b"P6", b"P3"):
        raise ValueError(f"read_ppm: unsupported magic {magic!r}")
    (w, h, maxval), offset = _read_header(data, 3)
    if maxval != 255:
        raise ValueError(f"read_ppm: maxval must be 255, got {maxval}")
    if magic == b"P6":
        raster = np.frombuffer(data, dtype=np.uint8, count=h * w * 3, offset=offset)
    else:
        raster = np.array(data[offset - 1 :].split(), dtype=np.uint8)
        if raster.size != h * w * 3:
            raise ValueError("read_ppm: raster size mismatch")
    return raster.reshape(h, w, 3).transpose(2, 0, 1).astype(np.float64) / 255.0


def read_pgm(path) -> np.ndarray:
    """Read P5 or P2 into a binary uint8 [H, W] mask (value > 127)."""
    data = Path(path).read_bytes()
    magic = data[:2]
    if magic not in (b"P5", b"P2"):
        raise ValueError(f"read_pgm: unsupported magic {magic!r}")
    (w, h, maxval), offset = _read_header(data, 3)
    if maxval != 255:
        raise ValueError(f"read_pgm: maxval must be 255, got {maxval}")
    if magic == b"P5":
        raster = np.frombuffer(data, dtype=np.uint8, count=h * w, offset=offset)
    else:
        raster = np.array(data[offset - 1 :].split(), dtype=np.uint8)
        if raster.size != h * w:
            raise ValueError("read_pgm: raster size mismatch")
    return (raster.reshape(h, w) > 127).astype(np.uint8)
