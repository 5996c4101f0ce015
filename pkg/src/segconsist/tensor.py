"""Minimal dense tensors with reverse-mode automatic differentiation.

Just enough machinery for region-based segmentation losses and a small
convolutional network: float64 data, same-shape or tensor-scalar
elementwise arithmetic, sigmoid/clamp/leaky-relu, a full-reduction sum,
direct-loop conv2d, and nearest-neighbor 2x upsampling.

Each op links its output to its parents; creation order is a topological
order of the graph, so `backward` walks the tensors reachable from the
loss in reverse creation order and visits each exactly once. Gradients
accumulate additively across fan-out. Tensors built from constants
(``requires_grad=False`` and no differentiable parents) never receive
gradients and never allocate backward closures.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

__all__ = [
    "Tensor",
    "sigmoid",
    "clamp",
    "leaky_relu",
    "reduce_sum",
    "conv2d",
    "upsample2x",
    "grad_check",
]

_SEQ = itertools.count()

# Divisors smaller than this are rejected rather than silently producing
# huge finite values.
_DIV_EPS = 1e-12


def _as_f64(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    return arr


class Tensor:
    """Dense float64 array participating in a differentiation graph."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_seq")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_f64(data)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward = None
        self._seq = next(_SEQ)

    @staticmethod
    def _from_op(data: np.ndarray, parents: tuple["Tensor", ...], backward_fn):
        """Wrap an op result; parents are the differentiable inputs only."""
        out = Tensor.__new__(Tensor)
        out.data = data
        out.requires_grad = True
        out.grad = None
        out._parents = parents
        out._backward = backward_fn
        out._seq = next(_SEQ)
        return out

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        """Constant copy sharing no graph history."""
        return Tensor(self.data.copy())

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- graph --------------------------------------------------------

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """Backpropagate from a scalar, filling ``grad`` on every
        differentiable tensor reachable through parent links."""
        if self.data.ndim != 0 and self.data.size != 1:
            raise ValueError(f"backward requires a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            raise ValueError("loss does not depend on any differentiable tensor")

        nodes = []
        seen = {id(self)}
        stack = [self]
        while stack:
            t = stack.pop()
            nodes.append(t)
            for p in t._parents:
                if id(p) not in seen:
                    seen.add(id(p))
                    stack.append(p)
        nodes.sort(key=lambda t: t._seq, reverse=True)

        self._accum(np.ones_like(self.data))
        for t in nodes:
            if t._backward is not None and t.grad is not None:
                t._backward(t.grad)

    def _accum(self, g: np.ndarray):
        if g.shape != self.data.shape:
            raise ValueError(
                f"gradient shape {g.shape} does not match value shape {self.data.shape}"
            )
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    # -- elementwise arithmetic ----------------------------------------

    def _coerce(self, other, opname):
        """Return (array, tensor-or-None) for the second operand."""
        if isinstance(other, Tensor):
            if other.data.shape != self.data.shape:
                raise ValueError(
                    f"{opname}: shape mismatch {self.data.shape} vs {other.data.shape}"
                )
            return other.data, other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return float(other), None
        return NotImplemented, None

    def __add__(self, other):
        b, bt = self._coerce(other, "add")
        if b is NotImplemented:
            return NotImplemented
        out = self.data + b
        parents = tuple(t for t in (self, bt) if t is not None and t.requires_grad)
        if not parents:
            return Tensor(out)
        a = self

        def bw(g):
            if a.requires_grad:
                a._accum(g)
            if bt is not None and bt.requires_grad:
                bt._accum(g)

        return Tensor._from_op(out, parents, bw)

    __radd__ = __add__

    def __sub__(self, other):
        b, bt = self._coerce(other, "sub")
        if b is NotImplemented:
            return NotImplemented
        out = self.data - b
        parents = tuple(t for t in (self, bt) if t is not None and t.requires_grad)
        if not parents:
            return Tensor(out)
        a = self

        def bw(g):
            if a.requires_grad:
                a._accum(g)
            if bt is not None and bt.requires_grad:
                bt._accum(-g)

        return Tensor._from_op(out, parents, bw)

    def __rsub__(self, other):
        # scalar - tensor
        if not isinstance(other, (int, float, np.floating, np.integer)):
            return NotImplemented
        out = float(other) - self.data
        if not self.requires_grad:
            return Tensor(out)
        a = self

        def bw(g):
            a._accum(-g)

        return Tensor._from_op(out, (a,), bw)

    def __mul__(self, other):
        b, bt = self._coerce(other, "mul")
        if b is NotImplemented:
            return NotImplemented
        out = self.data * b
        parents = tuple(t for t in (self, bt) if t is not None and t.requires_grad)
        if not parents:
            return Tensor(out)
        a = self
        a_data = self.data

        def bw(g):
            if a.requires_grad:
                a._accum(g * b)
            if bt is not None and bt.requires_grad:
                bt._accum(g * a_data)

        return Tensor._from_op(out, parents, bw)

    __rmul__ = __mul__

    def __truediv__(self, other):
        b, bt = self._coerce(other, "div")
        if b is NotImplemented:
            return NotImplemented
        if np.min(np.abs(b)) < _DIV_EPS:
            raise ValueError(f"div: divisor magnitude below {_DIV_EPS}")
        out = self.data / b
        parents = tuple(t for t in (self, bt) if t is not None and t.requires_grad)
        if not parents:
            return Tensor(out)
        a = self
        a_data = self.data

        def bw(g):
            if a.requires_grad:
                a._accum(g / b)
            if bt is not None and bt.requires_grad:
                bt._accum(-g * a_data / (b * b))

        return Tensor._from_op(out, parents, bw)

    def __neg__(self):
        out = -self.data
        if not self.requires_grad:
            return Tensor(out)
        a = self

        def bw(g):
            a._accum(-g)

        return Tensor._from_op(out, (a,), bw)

    def sigmoid(self) -> "Tensor":
        return sigmoid(self)

    def clamp(self, lo: float, hi: float) -> "Tensor":
        return clamp(self, lo, hi)

    def sum(self) -> "Tensor":
        return reduce_sum(self)


def sigmoid(x: Tensor) -> Tensor:
    """Numerically stable logistic function."""
    d = x.data
    out = np.empty_like(d)
    pos = d >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    e = np.exp(d[~pos])
    out[~pos] = e / (1.0 + e)
    if not x.requires_grad:
        return Tensor(out)

    def bw(g):
        x._accum(g * out * (1.0 - out))

    return Tensor._from_op(out, (x,), bw)


def clamp(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clip to [lo, hi]; subgradient is 1 strictly inside, 0 elsewhere
    (including at the boundary)."""
    if lo >= hi:
        raise ValueError(f"clamp: lo {lo} must be < hi {hi}")
    out = np.clip(x.data, lo, hi)
    if not x.requires_grad:
        return Tensor(out)
    inside = (x.data > lo) & (x.data < hi)

    def bw(g):
        x._accum(g * inside)

    return Tensor._from_op(out, (x,), bw)


def leaky_relu(x: Tensor, slope: float = 0.1) -> Tensor:
    out = np.where(x.data > 0, x.data, slope * x.data)
    if not x.requires_grad:
        return Tensor(out)
    factor = np.where(x.data > 0, 1.0, slope)

    def bw(g):
        x._accum(g * factor)

    return Tensor._from_op(out, (x,), bw)


def reduce_sum(x: Tensor) -> Tensor:
    """Sum of every element, as a 0-d tensor. The backward pass
    distributes the scalar gradient to all elements."""
    if x.data.size == 0:
        raise ValueError("reduce_sum: empty tensor")
    out = np.asarray(x.data.sum())
    if not x.requires_grad:
        return Tensor(out)

    def bw(g):
        x._accum(np.full_like(x.data, float(g)))

    return Tensor._from_op(out, (x,), bw)


def conv2d(
    x: Tensor,
    kernel: Tensor,
    stride: int = 1,
    padding: int = 0,
    bias: Tensor | None = None,
) -> Tensor:
    """2-d cross-correlation of a [C_in, H, W] input with a
    [C_out, C_in, k, k] kernel, computed by looping over the k*k kernel
    offsets and accumulating strided slices (no im2col, no FFT).

    ``bias`` is an optional [C_out] tensor added per output channel; its
    backward reduces over the spatial axes.
    """
    if x.data.ndim != 3:
        raise ValueError(f"conv2d: input must be [C,H,W], got {x.shape}")
    if kernel.data.ndim != 4:
        raise ValueError(f"conv2d: kernel must be [C_out,C_in,k,k], got {kernel.shape}")
    c_out, c_in, kh, kw = kernel.data.shape
    if kh != kw or kh % 2 == 0:
        raise ValueError(f"conv2d: kernel must be square with odd size, got {kh}x{kw}")
    if x.data.shape[0] != c_in:
        raise ValueError(
            f"conv2d: input channels {x.data.shape[0]} != kernel C_in {c_in}"
        )
    if stride < 1 or padding < 0:
        raise ValueError("conv2d: stride must be >= 1 and padding >= 0")
    _, h, w = x.data.shape
    h_out = (h + 2 * padding - kh) // stride + 1
    w_out = (w + 2 * padding - kw) // stride + 1
    if h_out < 1 or w_out < 1:
        raise ValueError(f"conv2d: output {h_out}x{w_out} would be empty")
    if bias is not None and bias.data.shape != (c_out,):
        raise ValueError(f"conv2d: bias must be [C_out]={c_out}, got {bias.shape}")

    k = kh
    if padding:
        xp = np.zeros((c_in, h + 2 * padding, w + 2 * padding))
        xp[:, padding : padding + h, padding : padding + w] = x.data
    else:
        xp = x.data
    kd = kernel.data

    out = np.zeros((c_out, h_out, w_out))
    for dy in range(k):
        for dx in range(k):
            patch = xp[:, dy : dy + stride * h_out : stride, dx : dx + stride * w_out : stride]
            out += np.tensordot(kd[:, :, dy, dx], patch, axes=([1], [0]))
    if bias is not None:
        out += bias.data[:, None, None]

    parents = tuple(
        t for t in (x, kernel, bias) if t is not None and t.requires_grad
    )
    if not parents:
        return Tensor(out)

    def bw(g):
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for dy in range(k):
                for dx in range(k):
                    gxp[
                        :, dy : dy + stride * h_out : stride, dx : dx + stride * w_out : stride
                    ] += np.tensordot(kd[:, :, dy, dx], g, axes=([0], [0]))
            if padding:
                gxp = gxp[:, padding : padding + h, padding : padding + w]
            x._accum(gxp)
        if kernel.requires_grad:
            gk = np.zeros_like(kd)
            for dy in range(k):
                for dx in range(k):
                    patch = xp[
                        :, dy : dy + stride * h_out : stride, dx : dx + stride * w_out : stride
                    ]
                    gk[:, :, dy, dx] = np.tensordot(g, patch, axes=([1, 2], [1, 2]))
            kernel._accum(gk)
        if bias is not None and bias.requires_grad:
            bias._accum(g.sum(axis=(1, 2)))

    return Tensor._from_op(out, parents, bw)


def upsample2x(x: Tensor) -> Tensor:
    """Nearest-neighbor 2x spatial upsampling of a [C, H, W] tensor."""
    if x.data.ndim != 3:
        raise ValueError(f"upsample2x: input must be [C,H,W], got {x.shape}")
    c, h, w = x.data.shape
    out = np.repeat(np.repeat(x.data, 2, axis=1), 2, axis=2)
    if not x.requires_grad:
        return Tensor(out)

    def bw(g):
        x._accum(g.reshape(c, h, 2, w, 2).sum(axis=(2, 4)))

    return Tensor._from_op(out, (x,), bw)


def grad_check(f, x: Tensor, h: float = 1e-5) -> float:
    """Compare analytic gradients of the scalar-valued ``f`` at ``x``
    against central finite differences.

    Returns max over elements of |analytic - numeric| / max(1, |analytic|).
    ``h`` must lie in [1e-7, 1e-3]; f must be finite near x.
    """
    if not (1e-7 <= h <= 1e-3):
        raise ValueError(f"grad_check: step {h} outside [1e-7, 1e-3]")
    x0 = x.data.copy()

    leaf = Tensor(x0.copy(), requires_grad=True)
    loss = f(leaf)
    if not np.isfinite(loss.data):
        raise ValueError("grad_check: f returned a non-finite value")
    if loss.requires_grad:
        loss.backward()
    analytic = leaf.grad if leaf.grad is not None else np.zeros_like(x0)

    numeric = np.zeros_like(x0)
    flat = x0.reshape(-1)
    num_flat = numeric.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f(Tensor(x0)).data)
        flat[i] = orig - h
        fm = float(f(Tensor(x0)).data)
        flat[i] = orig
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise ValueError("grad_check: f returned a non-finite value")
        num_flat[i] = (fp - fm) / (2.0 * h)

    denom = np.maximum(1.0, np.abs(analytic))
    return float(np.max(np.abs(analytic - numeric) / denom))
