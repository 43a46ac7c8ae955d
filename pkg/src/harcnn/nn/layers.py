"""Forward and backward kernels for the CNN layers.

All spatial tensors are channel-last: ``(B, H, W, C)``. Unbatched
``(H, W, C)`` inputs are accepted by the conv and pool forwards and handled
as a batch of one. Every forward returns ``(output, cache)`` and the matching
backward consumes that cache.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError


@dataclass(frozen=True)
class ConvLayerSpec:
    kernel_h: int
    kernel_w: int
    depth_multiplier: int = 1

    def __post_init__(self):
        if min(self.kernel_h, self.kernel_w) < 1 or self.depth_multiplier < 1:
            raise ShapeError(f"invalid conv spec {self}")


@dataclass(frozen=True)
class PoolLayerSpec:
    kernel_h: int
    kernel_w: int
    stride_h: int | None = None
    stride_w: int | None = None

    def __post_init__(self):
        # stride defaults to the kernel size (non-overlapping windows)
        if self.stride_h is None:
            object.__setattr__(self, "stride_h", self.kernel_h)
        if self.stride_w is None:
            object.__setattr__(self, "stride_w", self.kernel_w)
        if min(self.kernel_h, self.kernel_w, self.stride_h, self.stride_w) < 1:
            raise ShapeError(f"invalid pool spec {self}")

    def output_size(self, h: int, w: int) -> tuple[int, int]:
        return math.ceil(h / self.stride_h), math.ceil(w / self.stride_w)


@dataclass(frozen=True)
class DenseLayerSpec:
    units: int
    keep_prob: float = 1.0

    def __post_init__(self):
        if self.units < 1 or not 0.0 < self.keep_prob <= 1.0:
            raise ShapeError(f"invalid dense spec {self}")


def same_padding(k: int) -> tuple[int, int]:
    """Zero padding (before, after) that keeps the output size; odd extra goes after."""
    before = (k - 1) // 2
    return before, k - 1 - before


def _batched(x: np.ndarray) -> tuple[np.ndarray, bool]:
    if x.ndim == 3:
        return x[None], True
    if x.ndim != 4:
        raise ShapeError(f"expected (B,H,W,C) or (H,W,C) input, got {x.shape}")
    return x, False


# -- depthwise convolution ----------------------------------------------------


def depthwise_conv_forward(x, weights, bias):
    """Same-padded depthwise cross-correlation.

    ``weights`` has shape ``(kh, kw, C, M)``; output channel ``c * M + j`` is
    input channel ``c`` filtered by ``weights[:, :, c, j]``.
    """
    x4, squeeze = _batched(np.asarray(x, dtype=np.float64))
    B, H, W, C = x4.shape
    if weights.ndim != 4:
        raise ShapeError(f"conv weights must be (kh,kw,C,M), got {weights.shape}")
    kh, kw, wc, M = weights.shape
    if wc != C:
        raise ShapeError(f"conv weights expect {wc} channels, input has {C}")
    if bias.shape != (C * M,):
        raise ShapeError(f"conv bias must have shape ({C * M},), got {bias.shape}")

    pt, pb = same_padding(kh)
    pl, pr = same_padding(kw)
    xp = np.zeros((B, H + kh - 1, W + kw - 1, C))
    xp[:, pt : pt + H, pl : pl + W, :] = x4
    # (B,H,W,C,kh,kw) -> (C, B*H*W, kh*kw)
    cols = sliding_window_view(xp, (kh, kw), axis=(1, 2))
    cols = cols.transpose(3, 0, 1, 2, 4, 5).reshape(C, B * H * W, kh * kw)
    wmat = weights.reshape(kh * kw, C, M).transpose(1, 0, 2)
    out = np.matmul(cols, wmat)
    out = out.reshape(C, B, H, W, M).transpose(1, 2, 3, 0, 4).reshape(B, H, W, C * M)
    out += bias
    cache = (cols, weights, x4.shape, squeeze)
    return (out[0] if squeeze else out), cache


def depthwise_conv_backward(grad_out, cache, need_input_grad=True):
    """Return ``(grad_input, grad_weights, grad_bias)``.

    With ``need_input_grad=False`` the input gradient is skipped and returned
    as ``None`` (the first layer's input is data).
    """
    cols, weights, (B, H, W, C), squeeze = cache
    kh, kw, _, M = weights.shape
    g = np.asarray(grad_out, dtype=np.float64)
    if squeeze:
        g = g[None]
    if g.shape != (B, H, W, C * M):
        raise ShapeError(f"grad_out shape {g.shape} != {(B, H, W, C * M)}")

    grad_bias = _channel_sum(g)
    gmat = g.reshape(B, H, W, C, M).transpose(3, 0, 1, 2, 4).reshape(C, B * H * W, M)
    grad_w = np.matmul(cols.transpose(0, 2, 1), gmat)
    grad_w = grad_w.transpose(1, 0, 2).reshape(kh, kw, C, M)

    if not need_input_grad:
        return None, grad_w, grad_bias
    wmat = weights.reshape(kh * kw, C, M).transpose(1, 0, 2)
    gcols = np.matmul(gmat, wmat.transpose(0, 2, 1)).reshape(C, B, H, W, kh, kw)
    gcols = gcols.transpose(1, 2, 3, 0, 4, 5)
    gxp = np.zeros((B, H + kh - 1, W + kw - 1, C))
    for i in range(kh):
        for j in range(kw):
            gxp[:, i : i + H, j : j + W, :] += gcols[..., i, j]
    pt, _ = same_padding(kh)
    pl, _ = same_padding(kw)
    grad_x = gxp[:, pt : pt + H, pl : pl + W, :]
    if squeeze:
        grad_x = grad_x[0]
    return grad_x, grad_w, grad_bias


# -- batch normalization ------------------------------------------------------


def _channel_sum(x):
    """Sum over every axis but the last (BLAS-backed)."""
    x2 = x.reshape(-1, x.shape[-1])
    return np.ones(x2.shape[0]) @ x2


def _channel_dot(a, b):
    a2 = a.reshape(-1, a.shape[-1])
    b2 = b.reshape(-1, b.shape[-1])
    return np.einsum("ij,ij->j", a2, b2)


def batchnorm_forward(
    x,
    gamma,
    beta,
    running_mean,
    running_var,
    mode="train",
    momentum=0.9,
    eps=1e-5,
):
    """Per-channel batch normalization over every axis but the last.

    Returns ``(out, cache, new_running_mean, new_running_var)``. In train mode
    the running statistics are blended as ``momentum * old + (1 - momentum) *
    batch``; in infer mode they are used as-is and returned unchanged.
    """
    x = np.asarray(x, dtype=np.float64)
    if mode == "infer":
        inv_std = 1.0 / np.sqrt(running_var + eps)
        scale = gamma * inv_std
        out = x * scale
        out += beta - running_mean * scale
        cache = ((x, running_mean), inv_std, gamma, mode)
        return out, cache, running_mean, running_var
    if mode != "train":
        raise ValueError(f"unknown mode {mode!r}")
    if x.shape[0] < 2:
        raise ShapeError("batch norm needs at least 2 examples in train mode")
    n = x.size // x.shape[-1]
    mean = _channel_sum(x) / n
    xhat = x - mean
    var = _channel_dot(xhat, xhat) / n
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat *= inv_std
    out = xhat * gamma
    out += beta
    cache = (xhat, inv_std, gamma, mode)
    new_mean = momentum * running_mean + (1.0 - momentum) * mean
    new_var = momentum * running_var + (1.0 - momentum) * var
    return out, cache, new_mean, new_var


def batchnorm_backward(grad_out, cache):
    """Return ``(grad_input, grad_gamma, grad_beta)``."""
    xhat, inv_std, gamma, mode = cache
    g = np.asarray(grad_out, dtype=np.float64)
    grad_beta = _channel_sum(g)
    if mode == "infer":
        x, mean = xhat
        grad_gamma = _channel_dot(g, (x - mean) * inv_std)
        return g * (gamma * inv_std), grad_gamma, grad_beta
    grad_gamma = _channel_dot(g, xhat)
    n = g.size // g.shape[-1]
    grad_x = xhat * (grad_gamma / n)
    np.subtract(g, grad_x, out=grad_x)
    grad_x -= grad_beta / n
    grad_x *= gamma * inv_std
    return grad_x, grad_gamma, grad_beta


# -- max pooling --------------------------------------------------------------


def _pool_geometry(shape, spec):
    B, H, W, C = shape
    Ho, Wo = spec.output_size(H, W)
    Hp = max((Ho - 1) * spec.stride_h + spec.kernel_h, H)
    Wp = max((Wo - 1) * spec.stride_w + spec.kernel_w, W)
    return Ho, Wo, Hp, Wp


def _taps(xp, spec, Ho, Wo):
    sh, sw = spec.stride_h, spec.stride_w
    return [
        xp[:, di : di + (Ho - 1) * sh + 1 : sh, dj : dj + (Wo - 1) * sw + 1 : sw, :]
        for di in range(spec.kernel_h)
        for dj in range(spec.kernel_w)
    ]


def maxpool_forward(x, spec: PoolLayerSpec, need_argmax=True):
    """Ceil-mode max pooling; taps past the border count as -inf.

    Returns ``(out, cache)``. The cache holds the argmax map: for every
    output cell, the row-major position of the winning tap inside its
    window. Ties resolve to the first tap in row-major order.
    """
    x4, squeeze = _batched(np.asarray(x, dtype=np.float64))
    B, H, W, C = x4.shape
    Ho, Wo, Hp, Wp = _pool_geometry(x4.shape, spec)
    if (Hp, Wp) == (H, W):
        xp = x4
    else:
        xp = np.full((B, Hp, Wp, C), -np.inf)
        xp[:, :H, :W, :] = x4

    taps = _taps(xp, spec, Ho, Wo)
    out = taps[0].copy()
    for tap in taps[1:]:
        np.maximum(out, tap, out=out)
    arg = None
    if need_argmax:
        arg = np.zeros(out.shape, dtype=np.int16)
        for t in range(len(taps) - 1, 0, -1):
            np.copyto(arg, t, where=taps[t] == out)
        np.copyto(arg, 0, where=taps[0] == out)
    cache = (arg, x4.shape, spec, squeeze)
    return (out[0] if squeeze else out), cache


def argmax_flat_indices(cache):
    """Translate a pool cache's argmax map into flat row-major input indices."""
    arg, (B, H, W, C), spec, _ = cache
    Ho, Wo = arg.shape[1:3]
    di, dj = np.divmod(arg.astype(np.int64), spec.kernel_w)
    rows = np.arange(Ho)[None, :, None, None] * spec.stride_h + di
    cols = np.arange(Wo)[None, None, :, None] * spec.stride_w + dj
    b = np.arange(B)[:, None, None, None]
    c = np.arange(C)[None, None, None, :]
    return ((b * H + rows) * W + cols) * C + c


def maxpool_backward(grad_out, cache):
    """Route each output gradient to its argmax source; everything else is zero."""
    arg, shape, spec, squeeze = cache
    if arg is None:
        raise ShapeError("pool cache was built without an argmax map")
    g = np.asarray(grad_out, dtype=np.float64)
    if squeeze:
        g = g[None]
    if g.shape != arg.shape:
        raise ShapeError(f"grad_out shape {g.shape} != pooled shape {arg.shape}")
    B, H, W, C = shape
    Ho, Wo, Hp, Wp = _pool_geometry(shape, spec)
    gp = np.zeros((B, Hp, Wp, C))
    zero = np.zeros_like(g)
    for t, tap in enumerate(_taps(gp, spec, Ho, Wo)):
        tap += np.where(arg == t, g, zero)
    grad_x = gp[:, :H, :W, :]
    return grad_x[0] if squeeze else grad_x


# -- dense, activations, loss -------------------------------------------------


def dense_forward(x, weights, bias):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or weights.ndim != 2 or x.shape[1] != weights.shape[0]:
        raise ShapeError(f"dense shapes do not align: {x.shape} @ {weights.shape}")
    if bias.shape != (weights.shape[1],):
        raise ShapeError(f"dense bias must have shape ({weights.shape[1]},)")
    return x @ weights + bias, (x, weights)


def dense_backward(grad_out, cache):
    x, weights = cache
    return grad_out @ weights.T, x.T @ grad_out, grad_out.sum(axis=0)


def relu(x):
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0), x


def relu_backward(grad_out, cache):
    # subgradient at exactly zero is 0
    return grad_out * (cache > 0.0)


def dropout(x, keep_prob, rng=None, mode="train"):
    """Inverted dropout. Returns ``(out, mask)`` where mask already holds 1/keep."""
    x = np.asarray(x, dtype=np.float64)
    if mode == "infer" or keep_prob >= 1.0:
        return x, None
    if not 0.0 < keep_prob <= 1.0:
        raise ValueError(f"keep_prob must lie in (0, 1], got {keep_prob}")
    if rng is None:
        raise ValueError("train-mode dropout needs an rng")
    mask = (rng.random(x.shape) < keep_prob) / keep_prob
    return x * mask, mask


def dropout_backward(grad_out, mask):
    return grad_out if mask is None else grad_out * mask


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy over the batch.

    Returns ``(loss, grad_logits, probs)`` with ``grad_logits = (probs -
    onehot) / B``.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    B, m = logits.shape
    if labels.shape != (B,):
        raise ShapeError(f"expected {B} labels, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= m):
        raise ShapeError(f"labels must lie in [0, {m})")
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1, keepdims=True))
    log_probs = z - log_norm
    probs = np.exp(log_probs)
    rows = np.arange(B)
    loss = -log_probs[rows, labels].mean()
    grad = probs.copy()
    grad[rows, labels] -= 1.0
    grad /= B
    return float(loss), grad, probs
