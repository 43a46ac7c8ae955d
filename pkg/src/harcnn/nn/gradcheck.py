"""Central finite-difference checks for every layer and the whole network."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import layers as L
from .network import NetworkSpec, init_state, network_backward, network_forward

STEP = 1e-5
TOLERANCE = 1e-4
# absolute floor on the relative-error denominator; keeps exact zeros from
# dividing by zero without hiding real discrepancies
REL_FLOOR = 1e-8


@dataclass
class GradcheckRow:
    layer: str
    max_rel_error: float
    checked: int
    passed: bool
    fraction_ok: float = 1.0


@dataclass(frozen=True)
class GradcheckSizes:
    batch: int = 2
    height: int = 3
    width: int = 4
    channels: int = 2
    multiplier: int = 2
    dense_in: int = 5
    dense_out: int = 3
    classes: int = 3


def rel_error(analytic, numeric):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), REL_FLOOR)
    return np.abs(analytic - numeric) / denom


def numeric_grad(f, x, h=STEP, mask=None):
    """Central differences of scalar ``f`` w.r.t. every entry of ``x`` (mutated then restored)."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        if mask is not None and not mask[idx]:
            continue
        old = x[idx]
        x[idx] = old + h
        fp = f()
        x[idx] = old - h
        fm = f()
        x[idx] = old
        grad[idx] = (fp - fm) / (2 * h)
    return grad


def _compare(name, pairs, flip=False):
    errs = []
    for analytic, numeric, mask in pairs:
        a = -analytic if flip else analytic
        e = rel_error(a, numeric)
        errs.append(e[mask] if mask is not None else e.ravel())
    errs = np.concatenate(errs)
    worst = float(errs.max()) if errs.size else 0.0
    return GradcheckRow(name, worst, int(errs.size), worst < TOLERANCE)


def _away_from_zero(rng, shape, band=1e-3):
    x = rng.normal(size=shape)
    near = np.abs(x) < band
    x[near] = np.sign(x[near] + 1e-300) * (band + rng.random(near.sum()))
    return x


def check_conv(rng, s: GradcheckSizes, flip=False, kernel=(2, 2)):
    x = rng.normal(size=(s.batch, s.height, s.width, s.channels))
    w = rng.normal(size=(*kernel, s.channels, s.multiplier))
    b = rng.normal(size=s.channels * s.multiplier)
    r = rng.normal(size=(s.batch, s.height, s.width, s.channels * s.multiplier))

    def f():
        return float((L.depthwise_conv_forward(x, w, b)[0] * r).sum())

    _, cache = L.depthwise_conv_forward(x, w, b)
    gx, gw, gb = L.depthwise_conv_backward(r, cache)
    name = f"depthwise_conv {kernel[0]}x{kernel[1]}"
    return _compare(
        name,
        [(gx, numeric_grad(f, x), None), (gw, numeric_grad(f, w), None), (gb, numeric_grad(f, b), None)],
        flip,
    )


def check_batchnorm(rng, s: GradcheckSizes, flip=False):
    shape = (max(s.batch, 4), 2, 2, 3)
    x = rng.normal(size=shape) * 2 + 1
    gamma = rng.normal(size=shape[-1])
    beta = rng.normal(size=shape[-1])
    rm, rv = np.zeros(shape[-1]), np.ones(shape[-1])
    r = rng.normal(size=shape)

    def f():
        return float((L.batchnorm_forward(x, gamma, beta, rm, rv, "train")[0] * r).sum())

    _, cache, _, _ = L.batchnorm_forward(x, gamma, beta, rm, rv, "train")
    gx, gg, gb = L.batchnorm_backward(r, cache)
    return _compare(
        "batchnorm",
        [(gx, numeric_grad(f, x), None), (gg, numeric_grad(f, gamma), None), (gb, numeric_grad(f, beta), None)],
        flip,
    )


def check_maxpool(rng, s: GradcheckSizes, flip=False, pool=(2, 2), height=4, width=6):
    shape = (s.batch, height, width, s.channels)
    # distinct values spaced far wider than the step, so no window has a tie
    x = rng.permutation(int(np.prod(shape))).reshape(shape) * 0.01
    spec = L.PoolLayerSpec(*pool)
    out, cache = L.maxpool_forward(x, spec)
    r = rng.normal(size=out.shape)

    def f():
        return float((L.maxpool_forward(x, spec)[0] * r).sum())

    gx = L.maxpool_backward(r, cache)
    return _compare(f"maxpool {pool[0]}x{pool[1]}", [(gx, numeric_grad(f, x), None)], flip)


def check_dense(rng, s: GradcheckSizes, flip=False):
    x = rng.normal(size=(s.batch + 1, s.dense_in))
    w = rng.normal(size=(s.dense_in, s.dense_out))
    b = rng.normal(size=s.dense_out)
    r = rng.normal(size=(s.batch + 1, s.dense_out))

    def f():
        return float((L.dense_forward(x, w, b)[0] * r).sum())

    _, cache = L.dense_forward(x, w, b)
    gx, gw, gb = L.dense_backward(r, cache)
    return _compare(
        "dense",
        [(gx, numeric_grad(f, x), None), (gw, numeric_grad(f, w), None), (gb, numeric_grad(f, b), None)],
        flip,
    )


def check_relu(rng, s: GradcheckSizes, flip=False):
    x = _away_from_zero(rng, (s.batch, s.dense_in))
    r = rng.normal(size=x.shape)

    def f():
        return float((L.relu(x)[0] * r).sum())

    _, cache = L.relu(x)
    return _compare("relu", [(L.relu_backward(r, cache), numeric_grad(f, x), None)], flip)


def check_softmax_ce(rng, s: GradcheckSizes, flip=False):
    logits = rng.normal(size=(s.batch + 2, s.classes))
    labels = rng.integers(0, s.classes, size=logits.shape[0])

    def f():
        return L.softmax_cross_entropy(logits, labels)[0]

    _, grad, _ = L.softmax_cross_entropy(logits, labels)
    return _compare("softmax_cross_entropy", [(grad, numeric_grad(f, logits), None)], flip)


def check_network(rng, flip=False, spec: NetworkSpec | None = None, batch=2, seed=0):
    """End-to-end check of every parameter of a reduced network.

    Passes when at least 99% of parameters agree within tolerance; the rest
    may sit on ReLU kinks or pooling ties that the perturbation crosses.
    """
    if spec is None:
        spec = NetworkSpec.small(channels=1, output_units=3)
    state = init_state(spec, seed=seed)
    for k, v in state.params.items():
        if k.endswith(".b") or k.endswith(".beta"):
            v[...] = rng.normal(scale=0.1, size=v.shape)
    x = rng.normal(size=(batch, spec.input_h, spec.input_w, spec.channels))
    labels = rng.integers(0, spec.output_units, size=batch)

    def loss():
        logits, _ = network_forward(
            spec, state, x, "train", rng=np.random.default_rng(seed), update_stats=False
        )
        return L.softmax_cross_entropy(logits, labels)[0]

    logits, caches = network_forward(
        spec, state, x, "train", rng=np.random.default_rng(seed), update_stats=False
    )
    _, g, _ = L.softmax_cross_entropy(logits, labels)
    grads = network_backward(spec, state, caches, g)
    errs = []
    for name in sorted(state.params):
        analytic = -grads[name] if flip else grads[name]
        errs.append(rel_error(analytic, numeric_grad(loss, state.params[name])).ravel())
    errs = np.concatenate(errs)
    frac = float(np.mean(errs < TOLERANCE))
    return GradcheckRow("network", float(errs.max()), int(errs.size), frac >= 0.99, frac)


LAYER_CHECKS = {
    "depthwise_conv": lambda rng, s, flip: [
        check_conv(rng, s, flip, (2, 2)),
        check_conv(rng, s, flip, (3, 5)),
    ],
    "batchnorm": lambda rng, s, flip: [check_batchnorm(rng, s, flip)],
    "maxpool": lambda rng, s, flip: [
        check_maxpool(rng, s, flip, (2, 2)),
        check_maxpool(rng, s, flip, (3, 2), height=4, width=5),
    ],
    "dense": lambda rng, s, flip: [check_dense(rng, s, flip)],
    "relu": lambda rng, s, flip: [check_relu(rng, s, flip)],
    "softmax_cross_entropy": lambda rng, s, flip: [check_softmax_ce(rng, s, flip)],
    "network": lambda rng, s, flip: [check_network(rng, flip)],
}


def run_gradcheck(seed=0, sizes: GradcheckSizes | None = None, flip_layer=None, include_network=True):
    """Run every check and return ``(rows, seconds)``.

    ``flip_layer`` negates the analytic gradient of one layer family; it
    exists to prove the harness reports failures.
    """
    sizes = sizes or GradcheckSizes()
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    rows = []
    for name, fn in LAYER_CHECKS.items():
        if name == "network" and not include_network:
            continue
        rows.extend(fn(rng, sizes, name == flip_layer))
    return rows, time.perf_counter() - start
