"""Tiny convolutional encoder-decoder emitting per-pixel probabilities.

One stride-2 stage keeps the receptive field modest and training fast;
the network only needs to expose the contrast between training regimes,
not win benchmarks. Parameter count stays under 10k.

Checkpoints are a single file: a JSON header line (shapes, seed, regime)
followed by the concatenated little-endian float64 parameter data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tensor import Tensor, conv2d, leaky_relu, sigmoid, upsample2x

__all__ = ["TinySegNet", "init", "forward", "save_model", "load_model"]

LEAKY_SLOPE = 0.1

# name -> (C_out, C_in, k, stride, padding)
_LAYERS = (
    ("enc1", (8, 3, 3, 1, 1)),
    ("enc2", (16, 8, 3, 2, 1)),
    ("enc3", (16, 16, 3, 1, 1)),
    ("dec1", (8, 16, 3, 1, 1)),
    ("out", (1, 8, 1, 1, 0)),
)


@dataclass
class TinySegNet:
    params: dict[str, Tensor]
    seed: int
    regime: str = ""

    def parameter_count(self) -> int:
        return sum(t.size for t in self.params.values())

    def zero_grads(self):
        for t in self.params.values():
            t.zero_grad()

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self.params.items()}

    def restore(self, snap: dict[str, np.ndarray]):
        for k, t in self.params.items():
            t.data = snap[k].copy()


def init(seed: int) -> TinySegNet:
    """Kaiming-uniform kernels (bound sqrt(6 / fan_in)), zero biases."""
    rng = np.random.default_rng(seed)
    params: dict[str, Tensor] = {}
    for name, (c_out, c_in, k, _, _) in _LAYERS:
        fan_in = c_in * k * k
        bound = np.sqrt(6.0 / fan_in)
        params[f"{name}.kernel"] = Tensor(
            rng.uniform(-bound, bound, (c_out, c_in, k, k)), requires_grad=True
        )
        params[f"{name}.bias"] = Tensor(np.zeros(c_out), requires_grad=True)
    return TinySegNet(params=params, seed=int(seed))


def forward(model: TinySegNet, img) -> Tensor:
    """Probability map [1, H, W] for a [3, H, W] image; H and W must be
    even because of the single stride-2 stage."""
    x = img if isinstance(img, Tensor) else Tensor(img)
    if x.data.ndim != 3 or x.data.shape[0] != 3:
        raise ValueError(f"forward: expected [3,H,W], got {x.shape}")
    _, h, w = x.data.shape
    if h % 2 or w % 2:
        raise ValueError(f"forward: spatial dims must be even, got {h}x{w}")

    p = model.params

    def conv(name, t, stride, pad):
        return conv2d(t, p[f"{name}.kernel"], stride, pad, bias=p[f"{name}.bias"])

    x = leaky_relu(conv("enc1", x, 1, 1), LEAKY_SLOPE)
    x = leaky_relu(conv("enc2", x, 2, 1), LEAKY_SLOPE)
    x = leaky_relu(conv("enc3", x, 1, 1), LEAKY_SLOPE)
    x = upsample2x(x)
    x = leaky_relu(conv("dec1", x, 1, 1), LEAKY_SLOPE)
    return sigmoid(conv("out", x, 1, 0))


def save_model(model: TinySegNet, path) -> None:
    header = {
        "shapes": {k: list(t.data.shape) for k, t in model.params.items()},
        "seed": model.seed,
        "regime": model.regime,
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for k in sorted(model.params):
            f.write(model.params[k].data.astype("<f8").tobytes())


def load_model(path) -> TinySegNet:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    header = json.loads(raw[:nl])
    offset = nl + 1
    params: dict[str, Tensor] = {}
    loaded: dict[str, Tensor] = {}
    for k in sorted(header["shapes"]):
        shape = tuple(header["shapes"][k])
        count = int(np.prod(shape))
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape)
        loaded[k] = Tensor(arr.copy(), requires_grad=True)
        offset += count * 8
    # Preserve canonical layer order regardless of the sorted file order.
    for name, _ in _LAYERS:
        for suffix in ("kernel", "bias"):
            key = f"{name}.{suffix}"
            if key in loaded:
                params[key] = loaded.pop(key)
    params.update(loaded)
    return TinySegNet(params=params, seed=int(header["seed"]), regime=header.get("regime", ""))
