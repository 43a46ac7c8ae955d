"""The depthwise CNN: architecture description, parameters, and passes.

Layer order::

    conv1 -> bn1 -> relu -> pool1
    conv2 -> bn2 -> relu -> pool2
    conv3 -> bn3 -> relu -> pool3
    flatten -> [dense -> relu -> dropout] x 3 -> dense(m) -> softmax
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError
from . import layers as L
from .layers import ConvLayerSpec, DenseLayerSpec, PoolLayerSpec


def _default_convs():
    return (ConvLayerSpec(3, 5, 8), ConvLayerSpec(2, 4, 4), ConvLayerSpec(2, 2, 2))


def _default_pools():
    return (PoolLayerSpec(3, 3), PoolLayerSpec(2, 2), PoolLayerSpec(3, 2))


def _default_dense():
    return (DenseLayerSpec(500, 0.5), DenseLayerSpec(250, 0.5), DenseLayerSpec(125, 0.5))


@dataclass(frozen=True)
class NetworkSpec:
    channels: int
    output_units: int
    input_h: int = 6
    input_w: int = 204
    convs: tuple = field(default_factory=_default_convs)
    pools: tuple = field(default_factory=_default_pools)
    dense: tuple = field(default_factory=_default_dense)
    bn_momentum: float = 0.9
    bn_eps: float = 1e-5

    def __post_init__(self):
        if self.channels < 1 or self.output_units < 1:
            raise ShapeError("channels and output_units must be >= 1")
        if len(self.convs) != len(self.pools):
            raise ShapeError("every conv layer needs a matching pool layer")

    @classmethod
    def small(cls, channels: int, output_units: int, **kw) -> "NetworkSpec":
        """Reduced multipliers and dense widths, for gradient checks and quick tests."""
        kw.setdefault("convs", (ConvLayerSpec(3, 5, 2), ConvLayerSpec(2, 4, 1), ConvLayerSpec(2, 2, 1)))
        kw.setdefault("dense", (DenseLayerSpec(8, 0.5), DenseLayerSpec(6, 0.5), DenseLayerSpec(5, 0.5)))
        return cls(channels, output_units, **kw)

    def shape_trace(self) -> list[tuple[int, int, int]]:
        """(H, W, C) after the input and after each conv/pool stage."""
        h, w, c = self.input_h, self.input_w, self.channels
        trace = [(h, w, c)]
        for conv, pool in zip(self.convs, self.pools):
            c *= conv.depth_multiplier
            trace.append((h, w, c))
            h, w = pool.output_size(h, w)
            trace.append((h, w, c))
        return trace

    @property
    def flat_size(self) -> int:
        h, w, c = self.shape_trace()[-1]
        return h * w * c

    def to_dict(self) -> dict:
        return {
            "channels": self.channels,
            "output_units": self.output_units,
            "input_h": self.input_h,
            "input_w": self.input_w,
            "convs": [[s.kernel_h, s.kernel_w, s.depth_multiplier] for s in self.convs],
            "pools": [[s.kernel_h, s.kernel_w, s.stride_h, s.stride_w] for s in self.pools],
            "dense": [[s.units, s.keep_prob] for s in self.dense],
            "bn_momentum": self.bn_momentum,
            "bn_eps": self.bn_eps,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(
            channels=d["channels"],
            output_units=d["output_units"],
            input_h=d["input_h"],
            input_w=d["input_w"],
            convs=tuple(ConvLayerSpec(*s) for s in d["convs"]),
            pools=tuple(PoolLayerSpec(*s) for s in d["pools"]),
            dense=tuple(DenseLayerSpec(int(u), float(k)) for u, k in d["dense"]),
            bn_momentum=d["bn_momentum"],
            bn_eps=d["bn_eps"],
        )


@dataclass
class NetworkState:
    """Learned parameters plus batch-norm running statistics.

    ``params`` holds everything the optimizer updates; ``buffers`` holds the
    running means and variances. Keys are ``conv1.w``, ``bn1.gamma``,
    ``dense4.b`` and so on.
    """

    params: dict
    buffers: dict
    seed: int = 0

    def copy(self) -> "NetworkState":
        return NetworkState(
            {k: v.copy() for k, v in self.params.items()},
            {k: v.copy() for k, v in self.buffers.items()},
            self.seed,
        )


def init_state(spec: NetworkSpec, seed: int = 0, rng=None) -> NetworkState:
    """He-uniform weights, zero biases, unit gamma, zero beta."""
    if rng is None:
        rng = np.random.default_rng(seed)
    params, buffers = {}, {}
    c = spec.channels
    for i, conv in enumerate(spec.convs, start=1):
        m = conv.depth_multiplier
        limit = np.sqrt(6.0 / (conv.kernel_h * conv.kernel_w))
        params[f"conv{i}.w"] = rng.uniform(-limit, limit, (conv.kernel_h, conv.kernel_w, c, m))
        params[f"conv{i}.b"] = np.zeros(c * m)
        c *= m
        params[f"bn{i}.gamma"] = np.ones(c)
        params[f"bn{i}.beta"] = np.zeros(c)
        buffers[f"bn{i}.running_mean"] = np.zeros(c)
        buffers[f"bn{i}.running_var"] = np.ones(c)
    fan_in = spec.flat_size
    widths = [d.units for d in spec.dense] + [spec.output_units]
    for i, units in enumerate(widths, start=1):
        limit = np.sqrt(6.0 / fan_in)
        params[f"dense{i}.w"] = rng.uniform(-limit, limit, (fan_in, units))
        params[f"dense{i}.b"] = np.zeros(units)
        fan_in = units
    return NetworkState(params, buffers, seed)


def zero_state(spec: NetworkSpec) -> NetworkState:
    state = init_state(spec)
    for k, v in state.params.items():
        if not k.endswith(".gamma"):
            v[...] = 0.0
    return state


def check_input(spec: NetworkSpec, x: np.ndarray) -> None:
    want = (spec.input_h, spec.input_w, spec.channels)
    if x.ndim != 4 or x.shape[1:] != want:
        raise ShapeError(f"network input must be (B, {want[0]}, {want[1]}, {want[2]}), got {x.shape}")


def network_forward(spec, state, x, mode="train", rng=None, update_stats=True, trace=None):
    """Run the network on a batch ``x`` of shape ``(B, H, W, N)``.

    Returns ``(logits, caches)``. In train mode ``rng`` drives the dropout
    masks and, unless ``update_stats`` is false, the batch-norm running
    statistics in ``state.buffers`` are updated in place. When ``trace`` is a
    list, the shape after every layer is appended to it.
    """
    x = np.asarray(x, dtype=np.float64)
    check_input(spec, x)
    p, buf = state.params, state.buffers
    caches = []
    h = x
    for i, pool in enumerate(spec.pools, start=1):
        h, c_conv = L.depthwise_conv_forward(h, p[f"conv{i}.w"], p[f"conv{i}.b"])
        if trace is not None:
            trace.append((f"conv{i}", h.shape))
        h, c_bn, rm, rv = L.batchnorm_forward(
            h,
            p[f"bn{i}.gamma"],
            p[f"bn{i}.beta"],
            buf[f"bn{i}.running_mean"],
            buf[f"bn{i}.running_var"],
            mode=mode,
            momentum=spec.bn_momentum,
            eps=spec.bn_eps,
        )
        if mode == "train" and update_stats:
            buf[f"bn{i}.running_mean"] = rm
            buf[f"bn{i}.running_var"] = rv
        h, c_relu = L.relu(h)
        h, c_pool = L.maxpool_forward(h, pool, need_argmax=mode == "train")
        if trace is not None:
            trace.append((f"pool{i}", h.shape))
        caches.append((c_conv, c_bn, c_relu, c_pool))

    pooled_shape = h.shape
    h = h.reshape(h.shape[0], -1)
    if trace is not None:
        trace.append(("flatten", h.shape))
    dense_caches = []
    for i, d in enumerate(spec.dense, start=1):
        h, c_dense = L.dense_forward(h, p[f"dense{i}.w"], p[f"dense{i}.b"])
        h, c_relu = L.relu(h)
        h, mask = L.dropout(h, d.keep_prob, rng, mode)
        dense_caches.append((c_dense, c_relu, mask))
    k = len(spec.dense) + 1
    logits, c_out = L.dense_forward(h, p[f"dense{k}.w"], p[f"dense{k}.b"])
    if trace is not None:
        trace.append(("logits", logits.shape))
    return logits, (caches, pooled_shape, dense_caches, c_out)


def network_backward(spec, state, caches, grad_logits, input_grad=False):
    """Backpropagate ``grad_logits``; returns a dict keyed like ``state.params``.

    With ``input_grad`` the gradient w.r.t. the network input is added under
    the ``"input"`` key.
    """
    conv_caches, pooled_shape, dense_caches, c_out = caches
    grads = {}
    k = len(spec.dense) + 1
    g, grads[f"dense{k}.w"], grads[f"dense{k}.b"] = L.dense_backward(grad_logits, c_out)
    for i in range(len(spec.dense), 0, -1):
        c_dense, c_relu, mask = dense_caches[i - 1]
        g = L.dropout_backward(g, mask)
        g = L.relu_backward(g, c_relu)
        g, grads[f"dense{i}.w"], grads[f"dense{i}.b"] = L.dense_backward(g, c_dense)
    g = g.reshape(pooled_shape)
    for i in range(len(spec.pools), 0, -1):
        c_conv, c_bn, c_relu, c_pool = conv_caches[i - 1]
        g = L.maxpool_backward(g, c_pool)
        g = L.relu_backward(g, c_relu)
        g, grads[f"bn{i}.gamma"], grads[f"bn{i}.beta"] = L.batchnorm_backward(g, c_bn)
        need = input_grad or i > 1
        g, grads[f"conv{i}.w"], grads[f"conv{i}.b"] = L.depthwise_conv_backward(g, c_conv, need)
    if input_grad:
        grads["input"] = g
    return grads


def predict_proba(spec, state, x, batch_size=1024):
    """Inference-mode class probabilities, computed in chunks."""
    out = []
    for start in range(0, len(x), batch_size):
        logits, _ = network_forward(spec, state, x[start : start + batch_size], mode="infer")
        out.append(L.softmax(logits))
    if not out:
        return np.zeros((0, spec.output_units))
    return np.concatenate(out)
