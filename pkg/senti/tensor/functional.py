"""Differentiable primitives: arithmetic, reductions, convolutions and
(masked) channel statistics.

Each function computes its forward value with numpy and registers a
vector-Jacobian product on the returned `Tensor`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError
from .masks import as_mask_batch, require_weight
from .tensor import Tensor, as_tensor

DEFAULT_EPS = 1e-5
LEAKY_SLOPE = 0.2


def _result(array, parents, vjp, op) -> Tensor:
    return Tensor(array, parents=tuple(parents), vjp=vjp, op=op, copy=False)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _coerce(a, b) -> tuple[Tensor, Tensor]:
    """Wrap plain operands in the dtype of the tensor they meet."""
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        return a, Tensor(np.asarray(b, dtype=a.dtype), op="const")
    if isinstance(b, Tensor) and not isinstance(a, Tensor):
        return Tensor(np.asarray(a, dtype=b.dtype), op="const"), b
    return as_tensor(a), as_tensor(b)


def _check_broadcast(a: Tensor, b: Tensor, op: str):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# --- elementwise -----------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _coerce(a, b)
    _check_broadcast(a, b, "add")

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _result(a.data + b.data, (a, b), vjp, "add")


def sub(a, b) -> Tensor:
    a, b = _coerce(a, b)
    _check_broadcast(a, b, "sub")

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _result(a.data - b.data, (a, b), vjp, "sub")


def mul(a, b) -> Tensor:
    a, b = _coerce(a, b)
    _check_broadcast(a, b, "mul")

    def vjp(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _result(a.data * b.data, (a, b), vjp, "mul")


def div(a, b) -> Tensor:
    a, b = _coerce(a, b)
    _check_broadcast(a, b, "div")
    out = a.data / b.data

    def vjp(g):
        return _unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)

    return _result(out, (a, b), vjp, "div")


def neg(x) -> Tensor:
    x = as_tensor(x)
    return _result(-x.data, (x,), lambda g: (-g,), "neg")


def power(x, exponent: float) -> Tensor:
    x = as_tensor(x)

    def vjp(g):
        return (g * exponent * x.data ** (exponent - 1),)

    return _result(x.data**exponent, (x,), vjp, "power")


def sqrt(x) -> Tensor:
    x = as_tensor(x)
    out = np.sqrt(x.data)
    return _result(out, (x,), lambda g: (g * 0.5 / out,), "sqrt")


def square(x) -> Tensor:
    x = as_tensor(x)
    return _result(x.data * x.data, (x,), lambda g: (2 * g * x.data,), "square")


def abs(x) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    return _result(np.abs(x.data), (x,), lambda g: (g * np.sign(x.data),), "abs")


def relu(x) -> Tensor:
    x = as_tensor(x)
    active = x.data > 0
    return _result(np.where(active, x.data, 0).astype(x.dtype), (x,), lambda g: (g * active,), "relu")


def leaky_relu(x, slope: float = LEAKY_SLOPE) -> Tensor:
    x = as_tensor(x)
    factor = np.where(x.data > 0, 1.0, slope).astype(x.dtype)
    return _result(x.data * factor, (x,), lambda g: (g * factor,), "leaky_relu")


def tanh(x) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.data)
    return _result(out, (x,), lambda g: (g * (1 - out * out),), "tanh")


def softplus(x) -> Tensor:
    """log(1 + e^x), evaluated without overflow."""
    x = as_tensor(x)
    out = np.logaddexp(0, x.data).astype(x.dtype)
    slope = np.exp(-np.logaddexp(0, -x.data)).astype(x.dtype)  # sigmoid(x)
    return _result(out, (x,), lambda g: (g * slope,), "softplus")


# --- shape and reductions --------------------------------------------------


def sum(x, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).astype(x.dtype),)

    return _result(np.sum(x.data, axis=axis, keepdims=keepdims), (x,), vjp, "sum")


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    count = x.size if axis is None else int(np.prod([x.shape[a] for a in np.atleast_1d(axis)]))

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return ((np.broadcast_to(g, x.shape) / count).astype(x.dtype),)

    return _result(np.mean(x.data, axis=axis, keepdims=keepdims), (x,), vjp, "mean")


def reshape(x, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"cannot reshape {x.shape} to {tuple(shape)}") from None
    return _result(out, (x,), lambda g: (g.reshape(x.shape),), "reshape")


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as error:
        raise ShapeError(f"concat: {error}") from None
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def vjp(g):
        return tuple(np.take(g, np.arange(lo, hi), axis=axis) for lo, hi in zip(bounds[:-1], bounds[1:]))

    return _result(out, tensors, vjp, "concat")


def narrow(x, axis: int, start: int, stop: int) -> Tensor:
    """Slice `start:stop` along `axis`."""
    x = as_tensor(x)
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)

    def vjp(g):
        full = np.zeros_like(x.data)
        full[index] = g
        return (full,)

    return _result(x.data[index], (x,), vjp, "narrow")


def split(x, sizes: Sequence[int], axis: int = -1) -> list[Tensor]:
    x = as_tensor(x)
    axis = axis % x.ndim
    if np.sum(sizes) != x.shape[axis]:
        raise ShapeError(f"split sizes {list(sizes)} do not cover axis of length {x.shape[axis]}")
    bounds = np.cumsum([0] + list(sizes))
    return [narrow(x, axis, int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:])]


# --- network layers --------------------------------------------------------


def linear(x, weight, bias=None) -> Tensor:
    """x (N, D) times weight (O, D) transposed, plus bias (O,)."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"linear: input {x.shape} does not fit weight {weight.shape}")
    out = x.data @ weight.data.T

    def vjp(g):
        return g @ weight.data, g.T @ x.data

    y = _result(out, (x, weight), vjp, "linear")
    return y if bias is None else add(y, bias)


def conv2d(x, weight, bias=None, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of x (N, C, H, W) with weight (O, C, k, k), zero padded."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"conv2d: input {x.shape} does not fit weight {weight.shape}")
    n, c, h, w = x.shape
    kh, kw = weight.shape[2:]
    padded = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    out_h = (h + 2 * padding - kh) // stride + 1
    out_w = (w + 2 * padding - kw) // stride + 1
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"conv2d: kernel {kh}×{kw} does not fit input {h}×{w}")

    windows = sliding_window_view(padded, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    windows = windows[:, :, :out_h, :out_w]
    out = np.tensordot(windows, weight.data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)

    def vjp(g):
        d_weight = np.tensordot(g, windows, axes=([0, 2, 3], [0, 2, 3]))
        d_windows = np.tensordot(g, weight.data, axes=([1], [0]))  # N, Ho, Wo, C, kh, kw
        d_padded = np.zeros_like(padded)
        for i in range(kh):
            for j in range(kw):
                d_padded[
                    :, :, i : i + stride * (out_h - 1) + 1 : stride, j : j + stride * (out_w - 1) + 1 : stride
                ] += d_windows[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        return d_padded[:, :, padding : padding + h, padding : padding + w], d_weight

    y = _result(np.ascontiguousarray(out), (x, weight), vjp, "conv2d")
    if bias is None:
        return y
    return add(y, reshape(bias, (1, -1, 1, 1)))


def upsample2x(x) -> Tensor:
    """Nearest-neighbor upsampling of the two trailing axes."""
    x = as_tensor(x)
    n, c, h, w = x.shape
    out = x.data.repeat(2, axis=2).repeat(2, axis=3)
    return _result(out, (x,), lambda g: (g.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)),), "upsample2x")


def _weights_for(x: Tensor, mask) -> Tensor:
    n, _, h, w = x.shape
    weights = as_mask_batch(mask, n, h, w, dtype=x.dtype)
    require_weight(weights)
    return Tensor(weights, op="mask")


def global_avg_pool(x, mask=None) -> Tensor:
    """(N, C, H, W) -> (N, C) average over positions, weighted by `mask`."""
    x = as_tensor(x)
    weights = _weights_for(x, mask)
    total = sum(mul(x, weights), axis=(2, 3))
    return div(total, sum(weights, axis=(2, 3)))


# --- channel statistics ----------------------------------------------------


@dataclass(frozen=True)
class ChannelStats:
    """Per-channel mean and population std, kept broadcastable against z."""

    mean: Tensor
    std: Tensor


def _as_batch(z: Tensor) -> tuple[Tensor, bool]:
    if z.ndim == 3:
        return reshape(z, (1,) + z.shape), True
    if z.ndim == 4:
        return z, False
    raise ShapeError(f"expected C×H×W or N×C×H×W, got shape {z.shape}")


def channel_stats(z, mask=None, eps: float = DEFAULT_EPS) -> ChannelStats:
    """mean_c = Σ m·z_c / Σ m; std_c = sqrt(Σ m·(z_c − mean_c)² / Σ m + eps)."""
    z, squeezed = _as_batch(as_tensor(z))
    weights = _weights_for(z, mask)
    total = sum(weights, axis=(2, 3), keepdims=True)

    mu = div(sum(mul(z, weights), axis=(2, 3), keepdims=True), total)
    centered = sub(z, mu)
    var = div(sum(mul(square(centered), weights), axis=(2, 3), keepdims=True), total)
    sigma = sqrt(add(var, eps))

    if squeezed:
        mu, sigma = reshape(mu, mu.shape[1:]), reshape(sigma, sigma.shape[1:])
    return ChannelStats(mean=mu, std=sigma)


def _per_channel(value, z: Tensor) -> Tensor:
    """Reshape a (C,) or (N, C) vector so it broadcasts over z's positions."""
    value = as_tensor(value)
    channels = z.shape[-3]
    if value.shape[-1] != channels or value.ndim > 2:
        raise ShapeError(f"expected {channels} per-channel values, got shape {value.shape}")
    if z.ndim == 3:
        return reshape(value, (channels, 1, 1))
    return reshape(value, (-1, channels, 1, 1))


def instance_norm(z, mask=None, eps: float = DEFAULT_EPS) -> Tensor:
    z = as_tensor(z)
    stats = channel_stats(z, mask, eps)
    return div(sub(z, stats.mean), stats.std)


def adain(z, gamma, beta, mask=None, eps: float = DEFAULT_EPS) -> Tensor:
    """gamma·(z − μ(z))/σ(z) + beta.

    With a mask, μ and σ come from the masked positions only; the affine map
    still applies to every position.
    """
    z = as_tensor(z)
    normalized = instance_norm(z, mask, eps)
    return add(mul(normalized, _per_channel(gamma, z)), _per_channel(beta, z))
