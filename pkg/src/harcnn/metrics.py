"""Confusion matrices, per-class precision / recall / F-score, and model evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .nn.network import predict_proba


def confusion_matrix(truth, pred, m: int) -> np.ndarray:
    """Counts with rows = true class, columns = predicted class."""
    truth = np.asarray(truth, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if truth.shape != pred.shape:
        raise ValueError("truth and pred differ in length")
    if truth.size and (min(truth.min(), pred.min()) < 0 or max(truth.max(), pred.max()) >= m):
        raise ValueError(f"class indices must lie in [0, {m})")
    return np.bincount(truth * m + pred, minlength=m * m).reshape(m, m)


def _safe_div(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    return out


def scores(cm: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-class precision, recall and F-score; zero wherever a denominator is zero."""
    cm = np.asarray(cm)
    tp = np.diag(cm).astype(np.float64)
    precision = _safe_div(tp, cm.sum(axis=0))
    recall = _safe_div(tp, cm.sum(axis=1))
    fscore = _safe_div(2 * precision * recall, precision + recall)
    return precision, recall, fscore


def row_normalized(cm: np.ndarray) -> np.ndarray:
    """Rows scaled to sum to one; empty rows stay zero."""
    cm = np.asarray(cm, dtype=np.float64)
    return _safe_div(cm, cm.sum(axis=1, keepdims=True))


@dataclass
class EvalReport:
    labels: tuple
    confusion: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.confusion = np.asarray(self.confusion, dtype=np.int64)
        self.precision, self.recall, self.fscore = scores(self.confusion)

    @property
    def support(self) -> np.ndarray:
        return self.confusion.sum(axis=1)

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.confusion) / self.total) if self.total else 0.0

    @property
    def macro_precision(self) -> float:
        return float(self.precision.mean())

    @property
    def macro_recall(self) -> float:
        return float(self.recall.mean())

    @property
    def macro_f(self) -> float:
        return float(self.fscore.mean())

    def normalized(self) -> np.ndarray:
        return row_normalized(self.confusion)

    @classmethod
    def from_predictions(cls, labels, truth, pred, meta=None) -> "EvalReport":
        return cls(tuple(labels), confusion_matrix(truth, pred, len(labels)), dict(meta or {}))

    @classmethod
    def pooled(cls, reports, meta=None) -> "EvalReport":
        """Sum the confusion counts of several reports, then recompute the scores."""
        reports = list(reports)
        if not reports:
            raise ValueError("nothing to pool")
        labels = reports[0].labels
        if any(r.labels != labels for r in reports):
            raise ValueError("cannot pool reports over different label sets")
        return cls(labels, sum(r.confusion for r in reports), dict(meta or {}))


def evaluate(state, spec, dataset, meta=None, batch_size=1024) -> EvalReport:
    """Inference-mode evaluation (no dropout, running batch-norm statistics)."""
    if len(dataset) == 0:
        raise DataError("cannot evaluate on an empty test set")
    preds = []
    for start in range(0, len(dataset), batch_size):
        idx = np.arange(start, min(start + batch_size, len(dataset)))
        preds.append(predict_proba(spec, state, dataset.batch(idx), batch_size).argmax(axis=1))
    return EvalReport.from_predictions(dataset.group.labels, dataset.labels, np.concatenate(preds), meta)
