"""Differentiable forward operations.

Every function takes and returns :class:`~fusetl.autodiff.tensor.Tensor`.
Backward closures return one gradient per parent (``None`` where the parent
does not need one).
"""

import numpy as np

from ..errors import DegenerateBatchError, ShapeError, ValidationError
from . import kernels
from .tensor import Tensor

BCE_EPS = 1e-7

_OPEN_LO = np.nextafter(0.0, 1.0)
_OPEN_HI = np.nextafter(1.0, 0.0)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _out_size(size, k, stride, padding):
    return (size + 2 * padding - k) // stride + 1


def _pad(x, padding, value=0.0):
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)),
                  constant_values=value)


# --------------------------------------------------------------------------
# convolution / dense
# --------------------------------------------------------------------------

def conv2d(x, weight, bias=None, stride=1, padding=0, groups=1):
    """2-D cross-correlation on NCHW input with OIKK weights.

    ``groups == in_channels`` gives a depthwise convolution.
    """
    x, weight = _as_tensor(x), _as_tensor(weight)
    if x.ndim != 4:
        raise ShapeError(f"conv2d input must be NCHW, got shape {x.shape}")
    if weight.ndim != 4 or weight.shape[2] != weight.shape[3]:
        raise ShapeError(f"conv2d weight must be O x I x K x K, got shape {weight.shape}")
    if stride < 1 or padding < 0 or groups < 1:
        raise ShapeError(f"invalid stride={stride}, padding={padding}, groups={groups}")
    n, c, h, w = x.shape
    o, cg, k, _ = weight.shape
    if c % groups:
        raise ShapeError(f"input channels {c} not divisible by groups {groups}")
    if cg != c // groups:
        raise ShapeError(
            f"weight input-channel dim {cg} != in_channels/groups = {c}/{groups}")
    if o % groups:
        raise ShapeError(f"output channels {o} not divisible by groups {groups}")
    if bias is not None:
        bias = _as_tensor(bias)
        if bias.shape != (o,):
            raise ShapeError(f"conv2d bias must have shape ({o},), got {bias.shape}")
    oh, ow = _out_size(h, k, stride, padding), _out_size(w, k, stride, padding)
    if oh < 1 or ow < 1:
        raise ShapeError(f"kernel {k} larger than padded input {h}x{w} (padding {padding})")

    xp = _pad(x.data, padding)
    hp, wp = xp.shape[2:]
    cols = kernels.im2col(xp, k, stride, oh, ow)
    og = o // groups
    cols_g = cols.reshape(n, groups, cg * k * k, oh * ow)
    w_g = weight.data.reshape(groups, og, cg * k * k)
    out = np.matmul(w_g[None], cols_g).reshape(n, o, oh, ow)
    if bias is not None:
        out += bias.data[None, :, None, None]

    def _backward(g):
        g_g = g.reshape(n, groups, og, oh * ow)
        gx = gw = gb = None
        if weight.requires_grad:
            gw = np.matmul(g_g, cols_g.transpose(0, 1, 3, 2)).sum(axis=0).reshape(weight.shape)
        if x.requires_grad:
            dcols = np.matmul(w_g.transpose(0, 2, 1)[None], g_g)
            dxp = kernels.col2im(dcols.reshape(n, c, k, k, oh, ow), hp, wp, stride)
            gx = dxp[:, :, padding:padding + h, padding:padding + w]
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2, 3))
        return (gx, gw, gb)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._result(out, parents, _backward)


def linear(x, weight, bias=None):
    """``x @ weight.T + bias`` for N x F input and O x F weight."""
    x, weight = _as_tensor(x), _as_tensor(weight)
    if x.ndim != 2 or weight.ndim != 2:
        raise ShapeError(f"linear expects 2-D input and weight, got {x.shape} and {weight.shape}")
    if x.shape[1] != weight.shape[1]:
        raise ShapeError(
            f"linear input features {x.shape[1]} != weight in-features {weight.shape[1]}")
    if bias is not None:
        bias = _as_tensor(bias)
        if bias.shape != (weight.shape[0],):
            raise ShapeError(f"linear bias must have shape ({weight.shape[0]},), got {bias.shape}")
    out = x.data @ weight.data.T
    if bias is not None:
        out += bias.data

    def _backward(g):
        gx = g @ weight.data if x.requires_grad else None
        gw = g.T @ x.data if weight.requires_grad else None
        gb = g.sum(axis=0) if bias is not None and bias.requires_grad else None
        return (gx, gw, gb)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._result(out, parents, _backward)


# --------------------------------------------------------------------------
# elementwise
# --------------------------------------------------------------------------

def relu(x):
    x = _as_tensor(x)
    mask = x.data > 0
    out = np.maximum(x.data, 0.0).astype(x.data.dtype, copy=False)  # keeps NaN visible
    return Tensor._result(out, (x,), lambda g: (g * mask,))


def sigmoid(x):
    """Numerically stable logistic, clipped to the open interval (0, 1)."""
    x = _as_tensor(x)
    d = x.data
    e = np.exp(-np.abs(d))
    out = np.where(d >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    out = np.clip(out, _OPEN_LO, _OPEN_HI).astype(d.dtype, copy=False)
    return Tensor._result(out, (x,), lambda g: (g * out * (1.0 - out),))


def activation(x, kind):
    if kind == "relu":
        return relu(x)
    if kind == "sigmoid":
        return sigmoid(x)
    raise ValidationError(f"unknown activation {kind!r}")


def add(a, b):
    """Residual (skip) addition of two same-shaped tensors."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"residual add needs identical shapes, got {a.shape} and {b.shape}")
    return Tensor._result(a.data + b.data, (a, b), lambda g: (g, g))


residual_add = add


def mul(a, b):
    """Elementwise product of same-shaped tensors."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"mul needs identical shapes, got {a.shape} and {b.shape}")
    return Tensor._result(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def sum_all(x):
    x = _as_tensor(x)
    out = np.array(x.data.sum(), dtype=x.data.dtype)
    return Tensor._result(out, (x,), lambda g: (np.broadcast_to(g, x.shape).copy(),))


def mean_all(x):
    x = _as_tensor(x)
    n = x.data.size
    out = np.array(x.data.sum() / n, dtype=x.data.dtype)
    return Tensor._result(out, (x,), lambda g: (np.full(x.shape, g / n, dtype=x.data.dtype),))


# --------------------------------------------------------------------------
# normalization / regularization
# --------------------------------------------------------------------------

def batchnorm2d(x, gamma, beta, running_mean, running_var, momentum=0.1, eps=1e-5,
                training=True):
    """Per-channel batch normalization over N, H, W.

    ``running_mean`` and ``running_var`` are numpy buffers updated in place
    when ``training`` is true (running variance uses the unbiased estimate).
    """
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    if x.ndim != 4:
        raise ShapeError(f"batchnorm2d input must be NCHW, got shape {x.shape}")
    c = x.shape[1]
    for label, t in (("gamma", gamma.data), ("beta", beta.data),
                     ("running_mean", running_mean), ("running_var", running_var)):
        if t.shape != (c,):
            raise ShapeError(f"batchnorm2d {label} must have shape ({c},), got {t.shape}")
    axes = (0, 2, 3)
    m = x.shape[0] * x.shape[2] * x.shape[3]
    if training:
        if m < 2:
            raise DegenerateBatchError(
                "batchnorm2d in training mode needs at least 2 values per channel, "
                f"got N*H*W = {m}")
        mean = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * var * (m / (m - 1))
    else:
        mean, var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean[None, :, None, None]) * inv_std[None, :, None, None]
    out = xhat * gamma.data[None, :, None, None] + beta.data[None, :, None, None]

    def _backward(g):
        gx = None
        if x.requires_grad:
            dxhat = g * gamma.data[None, :, None, None]
            if training:
                s1 = dxhat.sum(axis=axes)[None, :, None, None]
                s2 = (dxhat * xhat).sum(axis=axes)[None, :, None, None]
                gx = (inv_std[None, :, None, None] / m) * (m * dxhat - s1 - xhat * s2)
            else:
                gx = dxhat * inv_std[None, :, None, None]
        gg = (g * xhat).sum(axis=axes) if gamma.requires_grad else None
        gb = g.sum(axis=axes) if beta.requires_grad else None
        return (gx, gg, gb)

    return Tensor._result(out, (x, gamma, beta), _backward)


def dropout(x, p, training, rng):
    """Inverted dropout: zero with probability ``p`` and scale survivors by 1/(1-p)."""
    if not 0.0 <= p < 1.0:
        raise ValidationError(f"dropout probability must lie in [0, 1), got {p}")
    x = _as_tensor(x)
    if not training or p == 0.0:
        return x
    keep = rng.random(x.shape) >= p
    scale = keep / (1.0 - p)
    return Tensor._result(x.data * scale, (x,), lambda g: (g * scale,))


# --------------------------------------------------------------------------
# pooling / merging
# --------------------------------------------------------------------------

def global_avg_pool(x):
    x = _as_tensor(x)
    if x.ndim != 4:
        raise ShapeError(f"global_avg_pool input must be NCHW, got shape {x.shape}")
    n, c, h, w = x.shape
    out = x.data.mean(axis=(2, 3))

    def _backward(g):
        return (np.broadcast_to(g[:, :, None, None] / (h * w), x.shape).copy(),)

    return Tensor._result(out, (x,), _backward)


def max_pool2d(x, kernel_size=2, stride=None, padding=0):
    x = _as_tensor(x)
    if x.ndim != 4:
        raise ShapeError(f"max_pool2d input must be NCHW, got shape {x.shape}")
    k = kernel_size
    s = stride or k
    n, c, h, w = x.shape
    oh, ow = _out_size(h, k, s, padding), _out_size(w, k, s, padding)
    if oh < 1 or ow < 1:
        raise ShapeError(f"pool window {k} larger than input {h}x{w}")
    xp = _pad(x.data, padding, value=-np.inf)
    hp, wp = xp.shape[2:]
    cols = kernels.im2col(xp, k, s, oh, ow).reshape(n, c, k * k, oh, ow)
    idx = cols.argmax(axis=2)
    out = np.take_along_axis(cols, idx[:, :, None], axis=2)[:, :, 0]

    def _backward(g):
        dcols = np.zeros((n, c, k * k, oh, ow), dtype=g.dtype)
        np.put_along_axis(dcols, idx[:, :, None], g[:, :, None], axis=2)
        dxp = kernels.col2im(dcols.reshape(n, c, k, k, oh, ow), hp, wp, s)
        return (dxp[:, :, padding:padding + h, padding:padding + w],)

    return Tensor._result(out, (x,), _backward)


def channel_concat(tensors):
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("channel_concat needs at least one tensor")
    ref = tensors[0].shape
    for t in tensors:
        if t.ndim != 4 or (t.shape[0],) + t.shape[2:] != (ref[0],) + ref[2:]:
            raise ShapeError(
                f"channel_concat needs identical N, H, W; got {ref} and {t.shape}")
    out = np.concatenate([t.data for t in tensors], axis=1)
    bounds = np.cumsum([0] + [t.shape[1] for t in tensors])

    def _backward(g):
        return tuple(g[:, bounds[i]:bounds[i + 1]] for i in range(len(tensors)))

    return Tensor._result(out, tensors, _backward)


def flatten(x):
    x = _as_tensor(x)
    out = x.data.reshape(x.shape[0], -1)
    return Tensor._result(out, (x,), lambda g: (g.reshape(x.shape),))


def reshape(x, shape):
    x = _as_tensor(x)
    out = x.data.reshape(shape)
    return Tensor._result(out, (x,), lambda g: (g.reshape(x.shape),))


def merge_and_pool(inputs, kind, **kwargs):
    """Dispatch by name; ``inputs`` is one tensor or a sequence for merges."""
    if kind == "residual_add":
        a, b = inputs
        return add(a, b)
    if kind == "channel_concat":
        return channel_concat(inputs)
    fn = {"global_avg_pool": global_avg_pool, "max_pool2d": max_pool2d,
          "flatten": flatten}.get(kind)
    if fn is None:
        raise ValidationError(f"unknown merge/pool kind {kind!r}")
    return fn(inputs, **kwargs)


# --------------------------------------------------------------------------
# loss
# --------------------------------------------------------------------------

def bce_loss(pred, target, eps=BCE_EPS):
    """Mean binary cross-entropy with predictions clamped to [eps, 1-eps].

    The gradient is evaluated at the clamped prediction and passed straight
    through the clamp, so saturated wrong predictions still get a signal.
    """
    pred = _as_tensor(pred)
    y = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=pred.data.dtype)
    if y.shape != pred.shape:
        raise ShapeError(f"bce_loss pred shape {pred.shape} != target shape {y.shape}")
    if not np.all((y == 0) | (y == 1)):
        raise ValidationError("bce_loss targets must be 0 or 1")
    n = pred.data.size
    p = np.clip(pred.data, eps, 1.0 - eps)
    losses = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    out = np.array(losses.sum() / n, dtype=pred.data.dtype)

    def _backward(g):
        return (g * (p - y) / (p * (1.0 - p)) / n,)

    return Tensor._result(out, (pred,), _backward)
