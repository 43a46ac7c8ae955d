"""Adam optimizer and the epoch training loop."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NumericError
from .nn import layers as L
from .nn.network import NetworkSpec, NetworkState, check_input, init_state, network_backward, network_forward
from .seeding import substream

log = logging.getLogger(__name__)

TRACE_FIELDS = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc")


@dataclass
class TrainConfig:
    batch_size: int = 1024
    epochs: int = 200
    learning_rate: float = 0.005
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    # multiplicative per-epoch learning-rate factor; 1.0 keeps it constant
    lr_decay: float = 1.0

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 (batch norm needs two examples)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0

    @classmethod
    def for_params(cls, params: dict) -> "AdamState":
        return cls(
            {k: np.zeros_like(p) for k, p in params.items()},
            {k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(params: dict, grads: dict, adam: AdamState, cfg: TrainConfig, lr: float | None = None) -> None:
    """One bias-corrected Adam update, in place on ``params`` and ``adam``.

    Raises :class:`NumericError` naming the parameter if any gradient is
    non-finite; nothing is updated in that case.
    """
    for name in params:
        if not np.all(np.isfinite(grads[name])):
            raise NumericError(f"non-finite gradient in {name}")
    lr = cfg.learning_rate if lr is None else lr
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    adam.t += 1
    step = lr / (1.0 - b1**adam.t)
    bc2 = 1.0 - b2**adam.t
    for name, p in params.items():
        g = grads[name]
        m, v = adam.m[name], adam.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= step * m / (np.sqrt(v / bc2) + cfg.adam_eps)


class ArrayDataset:
    """In-memory examples: ``x`` of shape (n, H, W, N) and integer labels."""

    def __init__(self, x, labels, subjects=None):
        self.x = np.asarray(x, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.subjects = (
            np.zeros(len(self.labels), dtype=np.int64) if subjects is None else np.asarray(subjects)
        )
        if len(self.x) != len(self.labels):
            raise DataError("x and labels differ in length")

    def __len__(self):
        return len(self.labels)

    def batch(self, idx):
        return self.x[idx]


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float | None = None
    val_acc: float | None = None


def batch_slices(n: int, batch_size: int, order) -> list:
    """Split ``order`` into batches; a trailing batch of one is dropped."""
    out = [order[i : i + batch_size] for i in range(0, n, batch_size)]
    if out and len(out[-1]) < 2:
        out.pop()
    return out


def evaluate_loss(spec, state, dataset, batch_size=1024) -> tuple[float, float]:
    """Inference-mode mean loss and accuracy."""
    total, correct, n = 0.0, 0, len(dataset)
    for start in range(0, n, batch_size):
        idx = np.arange(start, min(start + batch_size, n))
        logits, _ = network_forward(spec, state, dataset.batch(idx), mode="infer")
        y = dataset.labels[idx]
        loss, _, probs = L.softmax_cross_entropy(logits, y)
        total += loss * len(idx)
        correct += int((probs.argmax(axis=1) == y).sum())
    return total / n, correct / n


def _validate(spec: NetworkSpec, dataset) -> None:
    if len(dataset) == 0:
        raise DataError("cannot train on an empty dataset")
    if len(dataset) < 2:
        raise DataError("training needs at least 2 examples (batch norm)")
    labels = dataset.labels
    if labels.min() < 0 or labels.max() >= spec.output_units:
        raise DataError(f"labels must lie in [0, {spec.output_units})")
    check_input(spec, dataset.batch(np.arange(2)))


def train(spec: NetworkSpec, dataset, cfg: TrainConfig, val=None, state: NetworkState | None = None, on_batch=None):
    """Train from ``state`` (fresh He init when omitted).

    Returns ``(state, trace)`` where ``trace`` is a list of
    :class:`EpochStats`. ``on_batch`` is called with each batch's index
    array, which lets callers audit what the loop saw.
    """
    _validate(spec, dataset)
    if state is None:
        state = init_state(spec, seed=cfg.seed, rng=substream(cfg.seed, "init"))
    shuffle_rng = substream(cfg.seed, "shuffle")
    dropout_rng = substream(cfg.seed, "dropout")
    adam = AdamState.for_params(state.params)
    n = len(dataset)
    trace = []
    lr = cfg.learning_rate
    for epoch in range(1, cfg.epochs + 1):
        total, correct, seen = 0.0, 0, 0
        for idx in batch_slices(n, cfg.batch_size, shuffle_rng.permutation(n)):
            if on_batch is not None:
                on_batch(idx)
            y = dataset.labels[idx]
            logits, caches = network_forward(spec, state, dataset.batch(idx), "train", rng=dropout_rng)
            loss, grad, probs = L.softmax_cross_entropy(logits, y)
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss at epoch {epoch}")
            grads = network_backward(spec, state, caches, grad)
            adam_step(state.params, grads, adam, cfg, lr=lr)
            total += loss * len(idx)
            correct += int((probs.argmax(axis=1) == y).sum())
            seen += len(idx)
        stats = EpochStats(epoch, total / seen, correct / seen)
        if val is not None and len(val):
            stats.val_loss, stats.val_acc = evaluate_loss(spec, state, val, cfg.batch_size)
        trace.append(stats)
        log.info("epoch %d loss %.4f acc %.4f", epoch, stats.train_loss, stats.train_acc)
        lr *= cfg.lr_decay
    return state, trace


def write_trace_csv(path, trace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_FIELDS)
        for s in trace:
            w.writerow(
                [
                    s.epoch,
                    f"{s.train_loss:.6f}",
                    f"{s.train_acc:.6f}",
                    "" if s.val_loss is None else f"{s.val_loss:.6f}",
                    "" if s.val_acc is None else f"{s.val_acc:.6f}",
                ]
            )
