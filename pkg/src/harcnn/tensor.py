"""Minimal dense tensor helpers.

Tensors are plain row-major ``float64`` numpy arrays. This module adds the
shape validation and the small set of arithmetic primitives the rest of the
package relies on, raising :class:`ShapeError` instead of broadcasting.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import NumericError, ShapeError

DTYPE = np.float64

_ELEMENTWISE = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
    "max": np.maximum,
}

_REDUCE = {
    "sum": np.sum,
    "mean": np.mean,
    "max": np.max,
}


def check_shape(shape: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in shape)
    if not dims:
        raise ShapeError("shape must have at least one dimension")
    if any(d < 1 for d in dims):
        raise ShapeError(f"invalid shape {dims}: every extent must be >= 1")
    return dims


def tensor_new(shape: Sequence[int], fill: float = 0.0) -> np.ndarray:
    """Return a new tensor of ``shape`` with every element equal to ``fill``."""
    return np.full(check_shape(shape), fill, dtype=DTYPE)


def as_tensor(values) -> np.ndarray:
    arr = np.asarray(values, dtype=DTYPE)
    check_shape(arr.shape)
    return arr


def elementwise(op: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Apply ``op`` (add, sub, mul or max) to two tensors of identical shape."""
    if op not in _ELEMENTWISE:
        raise ValueError(f"unknown elementwise op {op!r}")
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    return _ELEMENTWISE[op](a, b)


def reduce(op: str, t: np.ndarray, axis: int) -> np.ndarray:
    """Reduce ``t`` along ``axis``; the result has rank one lower."""
    if op not in _REDUCE:
        raise ValueError(f"unknown reduction {op!r}")
    t = as_tensor(t)
    if not 0 <= axis < t.ndim:
        raise ShapeError(f"axis {axis} out of range for rank {t.ndim}")
    return _REDUCE[op](t, axis=axis)


def strides(shape: Sequence[int]) -> tuple[int, ...]:
    """Row-major element strides for ``shape``."""
    out = []
    acc = 1
    for d in reversed(check_shape(shape)):
        out.append(acc)
        acc *= d
    return tuple(reversed(out))


def flat_index(shape: Sequence[int], index: Sequence[int]) -> int:
    dims = check_shape(shape)
    if len(index) != len(dims):
        raise ShapeError(f"index rank {len(index)} != shape rank {len(dims)}")
    for i, d in zip(index, dims):
        if not 0 <= i < d:
            raise ShapeError(f"index {tuple(index)} out of bounds for {dims}")
    return sum(i * s for i, s in zip(index, strides(dims)))


def assert_finite(t: np.ndarray, what: str = "tensor") -> None:
    if not np.all(np.isfinite(t)):
        raise NumericError(f"non-finite values in {what}")
