"""Window segmentation, channel stacking and labelled window datasets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DataError, ShapeError
from .registry import ActivityGroup, SensorConfig, SensorId, check_applicable

WINDOW = 204
STRIDE = 5


@dataclass
class Example:
    block: np.ndarray  # (6, window, N)
    label: int | None
    subject_id: int
    activity: str
    start: int


def window_starts(length: int, window: int = WINDOW, stride: int = STRIDE) -> np.ndarray:
    """Start offsets of every full window; trailing samples that do not fill one are dropped."""
    if length < window:
        raise DataError(f"recording has {length} samples, fewer than the window length {window}")
    return np.arange(0, length - window + 1, stride)


def stack_channels(slices, config: SensorConfig) -> np.ndarray:
    """Stack tagged per-sensor ``(6, W)`` slices into a ``(6, W, N)`` block.

    ``slices`` is a sequence of ``(SensorId, array)`` pairs that must follow
    the configuration's sensor order exactly.
    """
    slices = list(slices)
    if len(slices) != config.arity:
        raise ShapeError(f"{config.name} needs {config.arity} slices, got {len(slices)}")
    tags = tuple(SensorId(t) for t, _ in slices)
    if tags != config.sensors:
        raise ShapeError(
            f"slice order {[t.value for t in tags]} does not match {config.name} "
            f"order {[s.value for s in config.sensors]}"
        )
    arrays = [np.asarray(a, dtype=np.float64) for _, a in slices]
    if any(a.shape != arrays[0].shape or a.ndim != 2 or a.shape[0] != 6 for a in arrays):
        raise ShapeError("slices must all be (6, W) and time-aligned")
    return np.stack(arrays, axis=-1)


def unstack_channels(block: np.ndarray, config: SensorConfig) -> list:
    if block.ndim != 3 or block.shape[-1] != config.arity:
        raise ShapeError(f"block shape {block.shape} does not match {config.name}")
    return [(s, block[..., j]) for j, s in enumerate(config.sensors)]


def _stacked_signal(recording, config: SensorConfig) -> np.ndarray:
    """(T, 6, N) array of the configuration's streams."""
    try:
        return np.stack([recording.streams[s] for s in config.sensors], axis=-1)
    except KeyError as exc:
        raise DataError(f"recording lacks sensor {exc.args[0]}") from None


def segment_windows(recording, config: SensorConfig, window=WINDOW, stride=STRIDE, label=None) -> list:
    """Cut one recording into overlapping windows; window k covers [k*stride, k*stride + window)."""
    signal = _stacked_signal(recording, config)
    starts = window_starts(len(signal), window, stride)
    views = sliding_window_view(signal, window, axis=0)  # (T-w+1, 6, N, w)
    return [
        Example(views[s].transpose(0, 2, 1), label, recording.subject_id, recording.activity, int(s))
        for s in starts
    ]


class WindowDataset:
    """Labelled windows over a set of recordings, materialized per batch.

    Windows are views into one concatenated ``(T_total, 6, N)`` signal, so
    even large stride-5 datasets stay small in memory.
    """

    def __init__(self, signal, offsets, labels, subjects, window_index, config, group, window=WINDOW, stride=STRIDE):
        self.signal = signal
        self.offsets = offsets
        self.labels = labels
        self.subjects = subjects
        self.window_index = window_index
        self.config = config
        self.group = group
        self.window = window
        self.stride = stride
        self._views = sliding_window_view(signal, window, axis=0) if len(signal) >= window else None

    def __len__(self) -> int:
        return len(self.labels)

    def batch(self, idx) -> np.ndarray:
        """``(B, 6, window, N)`` array for the given example indices."""
        if self._views is None:
            raise DataError("dataset is empty")
        return np.ascontiguousarray(self._views[self.offsets[idx]].transpose(0, 1, 3, 2))

    def __getitem__(self, i) -> Example:
        block = self.batch(np.array([i]))[0]
        label = int(self.labels[i])
        return Example(block, label, int(self.subjects[i]), self.group.labels[label], int(self.window_index[i]) * self.stride)

    def subset(self, idx) -> "WindowDataset":
        idx = np.asarray(idx)
        return WindowDataset(
            self.signal,
            self.offsets[idx],
            self.labels[idx],
            self.subjects[idx],
            self.window_index[idx],
            self.config,
            self.group,
            self.window,
            self.stride,
        )

    def thin(self, step: int) -> "WindowDataset":
        """Keep every ``step``-th window of each recording."""
        if step <= 1:
            return self
        return self.subset(np.flatnonzero(self.window_index % step == 0))

    def class_counts(self) -> dict:
        counts = np.bincount(self.labels, minlength=self.group.m)
        return {a: int(c) for a, c in zip(self.group.labels, counts)}


def build_dataset(recordings, group: ActivityGroup, config: SensorConfig, window=WINDOW, stride=STRIDE) -> WindowDataset:
    """Window every recording of ``group``'s activities under ``config``.

    Recordings of other activities are ignored. Windows never cross
    recording boundaries.
    """
    check_applicable(group, config)
    signals, offsets, labels, subjects, widx = [], [], [], [], []
    base = 0
    for rec in recordings:
        if rec.activity not in group.labels:
            continue
        sig = _stacked_signal(rec, config)
        starts = window_starts(len(sig), window, stride)
        signals.append(sig)
        offsets.append(base + starts)
        labels.append(np.full(len(starts), group.index(rec.activity)))
        subjects.append(np.full(len(starts), rec.subject_id))
        widx.append(np.arange(len(starts)))
        base += len(sig)

    def cat(parts, dtype):
        return np.concatenate(parts).astype(dtype) if parts else np.zeros(0, dtype=dtype)

    signal = np.concatenate(signals) if signals else np.zeros((0, 6, config.arity))
    return WindowDataset(
        signal,
        cat(offsets, np.int64),
        cat(labels, np.int64),
        cat(subjects, np.int64),
        cat(widx, np.int64),
        config,
        group,
        window,
        stride,
    )


def class_percentages(counts: dict, total: int | None = None) -> dict:
    """Share of each class in percent (all zeros for an empty dataset).

    ``total`` defaults to the sum of the counts; pass it explicitly to divide
    by a separately reported group size.
    """
    if total is None:
        total = sum(counts.values())
    return {k: (100.0 * v / total if total else 0.0) for k, v in counts.items()}
