"""Differentiable array ops with hand-written backward rules."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch
from .tape import Tensor, as_tensor, record


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _sigmoid(a):
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-a))


# -------------------------------------------------------------- elementwise


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data + b.data)
    record([out], [a, b], lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))
    return out


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data - b.data)
    record([out], [a, b], lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))
    return out


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data * b.data)
    record([out], [a, b], lambda g: (_unbroadcast(g * b.data, a.shape),
                                     _unbroadcast(g * a.data, b.shape)))
    return out


def tanh(x):
    x = as_tensor(x)
    y = np.tanh(x.data)
    out = Tensor(y)
    record([out], [x], lambda g: (g * (1 - y * y),))
    return out


def sigmoid(x):
    x = as_tensor(x)
    y = _sigmoid(x.data)
    out = Tensor(y)
    record([out], [x], lambda g: (g * y * (1 - y),))
    return out


def relu(x):
    x = as_tensor(x)
    mask = x.data > 0
    out = Tensor(np.where(mask, x.data, 0).astype(x.dtype))
    record([out], [x], lambda g: (g * mask,))
    return out


def prelu(x, alpha):
    """Leaky ReLU with a learned slope per channel (axis 0 of ``x``)."""
    x, alpha = as_tensor(x), as_tensor(alpha)
    a = alpha.data.reshape((-1,) + (1,) * (x.data.ndim - 1))
    neg = x.data < 0
    out = Tensor(np.where(neg, a * x.data, x.data).astype(x.dtype))

    def backward(g):
        ga = (g * np.where(neg, x.data, 0)).reshape(x.shape[0], -1).sum(axis=1)
        return g * np.where(neg, a, 1), ga.reshape(alpha.shape)

    record([out], [x, alpha], backward)
    return out


def activation(x, kind, alpha=None):
    if kind == "tanh":
        return tanh(x)
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "relu":
        return relu(x)
    if kind == "prelu":
        if alpha is None:
            raise ValueError("prelu needs an alpha parameter")
        return prelu(x, alpha)
    raise ValueError(f"unknown activation {kind!r}")


# ------------------------------------------------------------------ shapes


def reshape(x, shape):
    x = as_tensor(x)
    out = Tensor(x.data.reshape(shape))
    record([out], [x], lambda g: (g.reshape(x.shape),))
    return out


def take(x, index):
    """``x[index]`` for a basic (slice/int) index."""
    x = as_tensor(x)
    out = Tensor(x.data[index])

    def backward(g):
        full = np.zeros_like(x.data)
        full[index] = g
        return (full,)

    record([out], [x], backward)
    return out


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def backward(g):
        return tuple(np.take(g, np.arange(lo, hi), axis=axis) for lo, hi in zip(bounds[:-1], bounds[1:]))

    record([out], tensors, backward)
    return out


def broadcast_to(x, shape):
    x = as_tensor(x)
    out = Tensor(np.broadcast_to(x.data, shape).copy())
    record([out], [x], lambda g: (_unbroadcast(g, x.shape),))
    return out


# ------------------------------------------------------------------ layers


def linear(x, W, b=None):
    """``y = x @ W.T + b`` for ``x`` of shape ``[batch, in]`` or ``[in]``."""
    x, W = as_tensor(x), as_tensor(W)
    b = None if b is None else as_tensor(b)
    if x.shape[-1] != W.shape[1] or (b is not None and b.shape != (W.shape[0],)):
        raise ShapeMismatch(f"linear: x {x.shape}, W {W.shape}, b {None if b is None else b.shape}")
    y = x.data @ W.data.T
    if b is not None:
        y = y + b.data
    out = Tensor(y)

    def backward(g):
        gx = g @ W.data
        if x.data.ndim == 1:
            gW = np.outer(g, x.data)
            gb = g
        else:
            gW = g.T @ x.data
            gb = g.sum(axis=0)
        return (gx, gW) + ((gb,) if b is not None else ())

    record([out], [x, W] + ([b] if b is not None else []), backward)
    return out


def conv1d_causal(x, W, b=None, dilation=1):
    """Dilated causal convolution, ``[C_in, T] -> [C_out, T]``.

    Kernel tap ``K - 1`` multiplies the current sample; tap ``j`` reaches back
    ``dilation * (K - 1 - j)`` samples. The input is left zero-padded.
    """
    x, W = as_tensor(x), as_tensor(W)
    b = None if b is None else as_tensor(b)
    if x.data.ndim != 2 or W.data.ndim != 3 or W.shape[1] != x.shape[0]:
        raise ShapeMismatch(f"conv1d_causal: x {x.shape}, W {W.shape}")
    if b is not None and b.shape != (W.shape[0],):
        raise ShapeMismatch(f"conv1d_causal: bias {b.shape} for W {W.shape}")
    if dilation < 1:
        raise ValueError("dilation must be >= 1")
    c_out, c_in, K = W.shape
    T = x.shape[1]
    pad = dilation * (K - 1)
    xp = np.concatenate([np.zeros((c_in, pad), dtype=x.dtype), x.data], axis=1)
    y = np.zeros((c_out, T), dtype=np.result_type(x.data, W.data))
    for j in range(K):
        y += W.data[:, :, j] @ xp[:, j * dilation:j * dilation + T]
    if b is not None:
        y += b.data[:, None]
    out = Tensor(y)

    def backward(g):
        gW = np.empty_like(W.data)
        gxp = np.zeros_like(xp)
        for j in range(K):
            seg = slice(j * dilation, j * dilation + T)
            gW[:, :, j] = g @ xp[:, seg].T
            gxp[:, seg] += W.data[:, :, j].T @ g
        return (gxp[:, pad:], gW) + ((g.sum(axis=1),) if b is not None else ())

    record([out], [x, W] + ([b] if b is not None else []), backward)
    return out
