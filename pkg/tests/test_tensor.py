import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harcnn.errors import ShapeError
from harcnn.tensor import elementwise, flat_index, reduce, strides, tensor_new


def test_tensor_new_fill():
    np.testing.assert_array_equal(tensor_new([2, 2], 0), [[0, 0], [0, 0]])
    np.testing.assert_array_equal(tensor_new([1], 3.5), [3.5])
    assert tensor_new([6, 204, 2], 1).size == 6 * 204 * 2 == 2448
    assert tensor_new([2, 3]).dtype == np.float64


@pytest.mark.parametrize("shape", [[0], [2, 0], [], [3, -1]])
def test_tensor_new_rejects_bad_shapes(shape):
    with pytest.raises(ShapeError):
        tensor_new(shape, 0.0)


def test_elementwise_examples():
    np.testing.assert_array_equal(elementwise("add", [1, 2], [3, 4]), [4, 6])
    x = np.array([[1.5, -2.0], [3.0, 0.25]])
    np.testing.assert_array_equal(elementwise("mul", x, np.ones_like(x)), x)
    np.testing.assert_array_equal(elementwise("max", [1, -2], [0, 0]), [1, 0])
    np.testing.assert_array_equal(elementwise("sub", [5, 5], [2, 7]), [3, -2])


def test_elementwise_shape_mismatch():
    with pytest.raises(ShapeError):
        elementwise("add", np.ones(3), np.ones(4))
    with pytest.raises(ShapeError):
        elementwise("add", np.ones((2, 1)), np.ones((2, 3)))  # no broadcasting


def test_reduce_examples():
    np.testing.assert_array_equal(reduce("sum", [[1, 2], [3, 4]], 0), [4, 6])
    np.testing.assert_array_equal(reduce("mean", [[1, 3]], 1), [2])
    const = tensor_new([6, 204], 2.75)
    np.testing.assert_array_equal(reduce("max", const, 1), np.full(6, 2.75))
    with pytest.raises(ShapeError):
        reduce("sum", [[1, 2]], 2)


small_shapes = st.lists(st.integers(1, 4), min_size=1, max_size=4)


@given(small_shapes)
def test_flat_index_matches_nested_loop(shape):
    expected = 0
    for idx in itertools.product(*[range(d) for d in shape]):
        assert flat_index(shape, idx) == expected
        expected += 1
    assert strides(shape)[-1] == 1


floats = st.floats(-1e3, 1e3, allow_nan=False)


@given(st.lists(st.tuples(floats, floats, floats), min_size=1, max_size=20))
def test_add_commutative_associative(triples):
    a, b, c = (np.array(v) for v in zip(*triples))
    np.testing.assert_allclose(elementwise("add", a, b), elementwise("add", b, a), atol=1e-12)
    left = elementwise("add", elementwise("add", a, b), c)
    right = elementwise("add", a, elementwise("add", b, c))
    np.testing.assert_allclose(left, right, atol=1e-12)


@settings(max_examples=50)
@given(small_shapes, st.integers(0, 2**32 - 1))
def test_sequential_sum_equals_buffer_sum(shape, seed):
    t = np.random.default_rng(seed).normal(size=shape)
    out = t
    while out.ndim > 1:
        out = reduce("sum", out, 0)
    total = reduce("sum", out, 0)
    assert abs(float(total) - float(np.sum(t.ravel()))) <= 1e-9 * max(1.0, float(np.abs(t).sum()))
