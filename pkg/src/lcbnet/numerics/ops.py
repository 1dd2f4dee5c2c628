"""Differentiable primitives.

Matrix-like ops act on the last two axes and broadcast over any leading axes;
row-wise ops (softmax, layer norm) act on the last axis.
"""
import numpy as np

from .array import DiffArray, as_array, dropout_rng, make_node

MASK_VALUE = -1e9


def unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise arithmetic
# ---------------------------------------------------------------------------

def add(a, b):
    a, b = as_array(a), as_array(b)
    return make_node(a.data + b.data, (a, b),
                     lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)))


def sub(a, b):
    a, b = as_array(a), as_array(b)
    return make_node(a.data - b.data, (a, b),
                     lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)))


def mul(a, b):
    a, b = as_array(a), as_array(b)
    return make_node(a.data * b.data, (a, b),
                     lambda g: (unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)))


def div(a, b):
    a, b = as_array(a), as_array(b)
    out = a.data / b.data

    def back(g):
        return unbroadcast(g / b.data, a.shape), unbroadcast(-g * out / b.data, b.shape)

    return make_node(out, (a, b), back)


def exp(x):
    x = as_array(x)
    out = np.exp(x.data)
    return make_node(out, (x,), lambda g: (g * out,))


def log(x):
    x = as_array(x)
    return make_node(np.log(x.data), (x,), lambda g: (g / x.data,))


def sigmoid(x):
    """Logistic function, stable for large ``|x|``."""
    x = as_array(x)
    z = np.exp(-np.abs(x.data))
    out = np.where(x.data >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return make_node(out, (x,), lambda g: (g * out * (1.0 - out),))


def silu(x):
    x = as_array(x)
    s = sigmoid(x.data).data
    out = x.data * s
    return make_node(out, (x,), lambda g: (g * (s + out * (1.0 - s)),))


# ---------------------------------------------------------------------------
# shape and reduction
# ---------------------------------------------------------------------------

def matmul(a, b):
    a, b = as_array(a), as_array(b)
    if a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise ValueError(f"matmul dimension mismatch: {a.shape} x {b.shape}")
    out = _mm(a.data, b.data)

    def back(g):
        ga = unbroadcast(_mm(g, np.swapaxes(b.data, -1, -2)), a.shape) if a.requires_grad else None
        gb = unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape) if b.requires_grad else None
        return ga, gb

    return make_node(out, (a, b), back)


def _mm(x, w):
    # stacked [..., m, k] times a plain [k, n] is one gemm after flattening
    if x.ndim > 2 and w.ndim == 2:
        return (x.reshape(-1, x.shape[-1]) @ w).reshape(x.shape[:-1] + (w.shape[-1],))
    return x @ w


def swapaxes(x, i, j):
    x = as_array(x)
    return make_node(np.swapaxes(x.data, i, j), (x,), lambda g: (np.swapaxes(g, i, j),))


def reshape(x, shape):
    x = as_array(x)
    return make_node(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def split_heads(x, n_heads):
    """``[..., T, d]`` -> ``[..., heads, T, d / heads]``."""
    x = as_array(x)
    d = x.shape[-1]
    return swapaxes(reshape(x, x.shape[:-1] + (n_heads, d // n_heads)), -3, -2)


def merge_heads(x):
    """Inverse of ``split_heads``."""
    x = swapaxes(x, -3, -2)
    return reshape(x, x.shape[:-2] + (x.shape[-2] * x.shape[-1],))


def sum(x, axis=None, keepdims=False):
    x = as_array(x)
    out = np.sum(x.data, axis=axis, keepdims=keepdims)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return make_node(out, (x,), back)


def mean(x, axis=None, keepdims=False):
    x = as_array(x)
    n = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / n)


def take_rows(table, ids):
    """Row lookup along axis -2 (embedding)."""
    table = as_array(table)
    ids = np.asarray(ids, dtype=np.int64)
    out = np.take(table.data, ids, axis=-2)

    def back(g):
        gt = np.zeros_like(table.data)
        np.add.at(np.moveaxis(gt, -2, 0), ids, np.moveaxis(g, -2, 0))
        return (gt,)

    return make_node(out, (table,), back)


def pick(x, idx):
    """``out[..., i] = x[..., i, idx[i]]`` for ``x`` of shape ``[..., n, V]``."""
    x = as_array(x)
    idx = np.asarray(idx, dtype=np.int64)
    rows = np.arange(idx.shape[0])
    out = x.data[..., rows, idx]

    def back(g):
        gx = np.zeros_like(x.data)
        gx[..., rows, idx] = g
        return (gx,)

    return make_node(out, (x,), back)


def windows(x, span, stride=1, pad=0):
    """Sliding windows along axis -2 with zero padding.

    ``[..., L, d]`` -> ``[..., L_out, span, d]`` with
    ``L_out = (L + 2*pad - span) // stride + 1``.
    """
    x = as_array(x)
    L = x.shape[-2]
    n_out = (L + 2 * pad - span) // stride + 1
    if n_out < 1:
        raise ValueError(f"sequence of length {L} too short for span {span}, stride {stride}")
    idx = stride * np.arange(n_out)[:, None] + np.arange(span)[None, :] - pad
    valid = (idx >= 0) & (idx < L)
    safe = np.clip(idx, 0, max(L - 1, 0))
    out = np.take(x.data, safe, axis=-2) * valid[:, :, None]

    def back(g):
        gx = np.zeros_like(x.data)
        g = g * valid[:, :, None]
        np.add.at(np.moveaxis(gx, -2, 0), safe, np.moveaxis(g, (-3, -2), (0, 1)))
        return (gx,)

    return make_node(out, (x,), back)


# ---------------------------------------------------------------------------
# neural-network primitives
# ---------------------------------------------------------------------------

def softmax_rows(x):
    """Softmax over the last axis with per-row max subtraction."""
    x = as_array(x)
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return make_node(out, (x,), back)


def log_softmax(x):
    x = as_array(x)
    z = x.data - x.data.max(axis=-1, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))

    def back(g):
        return (g - np.exp(out) * g.sum(axis=-1, keepdims=True),)

    return make_node(out, (x,), back)


def layer_norm(x, gain, bias, eps=1e-5):
    """Normalise each row to zero mean and unit variance, then scale and shift."""
    x, gain, bias = as_array(x), as_array(gain), as_array(bias)
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    out = xhat * gain.data + bias.data

    def back(g):
        gx = gg = gb = None
        if x.requires_grad:
            gh = g * gain.data
            gx = inv * (gh - gh.mean(axis=-1, keepdims=True)
                        - xhat * (gh * xhat).mean(axis=-1, keepdims=True))
            gx = unbroadcast(gx, x.shape)
        if gain.requires_grad:
            gg = unbroadcast(g * xhat, gain.shape)
        if bias.requires_grad:
            gb = unbroadcast(g, bias.shape)
        return gx, gg, gb

    return make_node(out, (x, gain, bias), back)


def conv1d(x, kernels, bias, stride=1, pad=0):
    """1-D convolution along axis -2.

    x: ``[..., L, d_in]``; kernels: ``[..., span, d_in, d_out]``; bias: ``[d_out]``.
    """
    x, kernels = as_array(x), as_array(kernels)
    span, d_in, d_out = kernels.shape[-3:]
    if x.shape[-1] != d_in:
        raise ValueError(f"conv1d input width {x.shape[-1]} != kernel input width {d_in}")
    w = windows(x, span, stride, pad)
    w = reshape(w, w.shape[:-2] + (span * d_in,))
    k = reshape(kernels, kernels.shape[:-3] + (span * d_in, d_out))
    return add(matmul(w, k), bias)


def conv1d_same(x, kernels, bias):
    """Length-preserving convolution; positions outside the sequence read as zero."""
    span = as_array(kernels).shape[-3]
    if span % 2 == 0:
        raise ValueError(f"conv1d_same needs an odd span, got {span}")
    return conv1d(x, kernels, bias, stride=1, pad=span // 2)


def depthwise_conv1d_same(x, kernels, bias):
    """Per-channel convolution. kernels: ``[span, d]``."""
    x, kernels = as_array(x), as_array(kernels)
    span = kernels.shape[-2]
    if span % 2 == 0:
        raise ValueError(f"depthwise conv needs an odd span, got {span}")
    w = windows(x, span, 1, span // 2)
    return add(sum(mul(w, kernels), axis=-2), bias)


def linear(x, weight, bias=None):
    out = matmul(x, weight)
    return out if bias is None else add(out, bias)


def causal_mask(n):
    """Additive mask hiding future positions."""
    return np.triu(np.full((n, n), MASK_VALUE), k=1)


def clip(x, lo, hi):
    x = as_array(x)
    inside = (x.data >= lo) & (x.data <= hi)
    return make_node(np.clip(x.data, lo, hi), (x,), lambda g: (g * inside,))


def dropout(x, p):
    """Inverted dropout; the identity unless a ``dropout_scope`` is active."""
    rng = dropout_rng()
    if rng is None or p <= 0.0:
        return as_array(x)
    x = as_array(x)
    keep = (rng.random(x.shape) >= p) / (1.0 - p)
    return mul(x, keep)
