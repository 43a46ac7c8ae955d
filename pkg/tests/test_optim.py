import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harcnn.errors import DataError, NumericError
from harcnn.nn import layers as L
from harcnn.nn.layers import DenseLayerSpec
from harcnn.nn.network import NetworkSpec, init_state, network_backward, network_forward
from harcnn.optim import (
    AdamState,
    ArrayDataset,
    TrainConfig,
    adam_step,
    batch_slices,
    evaluate_loss,
    train,
    write_trace_csv,
)


def adam_oracle(w, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
    """Scalar textbook Adam, one gradient per step."""
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        w -= lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
    return w


def _step(w, g, cfg, adam=None):
    params, grads = {"w": np.array([w], dtype=float)}, {"w": np.array([g], dtype=float)}
    adam = adam or AdamState.for_params(params)
    adam_step(params, grads, adam, cfg)
    return params["w"][0], adam


def test_adam_first_step():
    w, adam = _step(1.0, 1.0, TrainConfig())
    assert w == pytest.approx(0.995, abs=1e-9)
    assert adam.t == 1


def test_adam_zero_gradient_leaves_params():
    w, adam = _step(3.0, 0.0, TrainConfig())
    assert w == 3.0
    assert adam.v["w"][0] == 0.0


def test_adam_matches_oracle_over_many_steps(rng):
    cfg = TrainConfig(learning_rate=0.01)
    grads = rng.normal(size=25)
    params = {"w": np.array([0.5])}
    adam = AdamState.for_params(params)
    for g in grads:
        adam_step(params, {"w": np.array([g])}, adam, cfg)
        assert adam.v["w"][0] >= 0
    assert params["w"][0] == pytest.approx(adam_oracle(0.5, grads, 0.01), rel=1e-12)


@given(st.floats(1e-6, 1e3), st.floats(-10, 10))
@settings(max_examples=50, deadline=None)
def test_adam_first_step_closed_form(g, w0):
    d = _step(w0, g, TrainConfig())[0] - w0
    assert d == pytest.approx(-0.005 * g / (g + 1e-8), rel=1e-6, abs=1e-15)


# eps / |g| stays below 1e-6 here, so eps cannot account for the tolerance
@given(st.floats(0.05, 1e3), st.floats(-10, 10))
@settings(max_examples=50, deadline=None)
def test_adam_first_step_scale_invariant(g, w0):
    cfg = TrainConfig()
    d1 = _step(w0, g, cfg)[0] - w0
    d2 = _step(w0, 2 * g, cfg)[0] - w0
    assert d2 == pytest.approx(d1, rel=1e-6)


def test_adam_rejects_non_finite_gradient():
    params = {"conv1.w": np.ones(2), "dense1.w": np.ones(2)}
    adam = AdamState.for_params(params)
    with pytest.raises(NumericError, match="dense1.w"):
        adam_step(params, {"conv1.w": np.ones(2), "dense1.w": np.array([1.0, np.nan])}, adam, TrainConfig())
    assert adam.t == 0
    np.testing.assert_array_equal(params["conv1.w"], 1.0)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(batch_size=1)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1.0)
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)


def test_batch_slices_drop_single_tail():
    assert [len(b) for b in batch_slices(10, 4, np.arange(10))] == [4, 4, 2]
    assert [len(b) for b in batch_slices(9, 4, np.arange(9))] == [4, 4]
    assert [len(b) for b in batch_slices(5, 64, np.arange(5))] == [5]


def separable(n=200, seed=0):
    """Two classes whose windows differ in mean by 2 standard deviations."""
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    x = rng.normal(size=(n, 6, 204, 1)) + (2.0 * y - 1.0)[:, None, None, None]
    return ArrayDataset(x, y)


SPEC = NetworkSpec.small(channels=1, output_units=2)


def test_train_reaches_high_accuracy_on_separable_data():
    data = separable()
    state, trace = train(SPEC, data, TrainConfig(batch_size=64, epochs=50, seed=0))
    # the trace's train_acc is a running dropout-mode figure; measure the set itself
    _, acc = evaluate_loss(SPEC, state, data)
    assert acc >= 0.99
    assert [s.epoch for s in trace] == list(range(1, 51))


def test_full_batch_loss_strictly_decreases():
    data = separable(seed=1)
    state = init_state(SPEC, seed=0)
    cfg = TrainConfig(batch_size=len(data))
    adam = AdamState.for_params(state.params)
    x, y = data.x, data.labels
    drop = np.random.default_rng(9)

    def fixed_loss():
        logits, _ = network_forward(SPEC, state, x, "train", rng=np.random.default_rng(0), update_stats=False)
        return L.softmax_cross_entropy(logits, y)[0]

    losses = [fixed_loss()]
    for _ in range(5):
        logits, caches = network_forward(SPEC, state, x, "train", rng=drop)
        grad = L.softmax_cross_entropy(logits, y)[1]
        adam_step(state.params, network_backward(SPEC, state, caches, grad), adam, cfg)
        losses.append(fixed_loss())
    assert all(b < a for a, b in zip(losses, losses[1:])), losses


def test_zero_learning_rate_freezes_everything():
    data = separable(n=40)
    start = init_state(SPEC, seed=0)
    state, _ = train(SPEC, data, TrainConfig(batch_size=16, epochs=3, learning_rate=0.0), state=start.copy())
    for k in start.params:
        np.testing.assert_array_equal(state.params[k], start.params[k])

    # without dropout the full-batch loss is the same number each epoch
    nodrop = NetworkSpec.small(1, 2, dense=tuple(DenseLayerSpec(u, 1.0) for u in (8, 6, 5)))
    _, trace = train(nodrop, data, TrainConfig(batch_size=40, epochs=4, learning_rate=0.0))
    losses = [s.train_loss for s in trace]
    assert max(losses) - min(losses) < 1e-12


def test_each_epoch_is_a_permutation():
    data = separable(n=50)
    seen = []
    train(SPEC, data, TrainConfig(batch_size=8, epochs=3, learning_rate=0.0), on_batch=seen.append)
    per_epoch = len(batch_slices(50, 8, np.arange(50)))
    assert per_epoch == 7
    for e in range(3):
        idx = np.concatenate(seen[e * per_epoch : (e + 1) * per_epoch])
        assert sorted(idx.tolist()) == list(range(50))
    assert not np.array_equal(np.concatenate(seen[:7]), np.concatenate(seen[7:14]))


def test_batch_larger_than_dataset_still_trains():
    data = separable(n=30)
    seen = []
    state, trace = train(SPEC, data, TrainConfig(batch_size=1024, epochs=10, seed=2), on_batch=seen.append)
    assert len(seen) == 10 and all(len(b) == 30 for b in seen)
    assert trace[-1].train_loss < trace[0].train_loss


def test_training_is_deterministic():
    data = separable(n=40)
    cfg = TrainConfig(batch_size=16, epochs=2, seed=5)
    a, ta = train(SPEC, data, cfg)
    b, tb = train(SPEC, data, cfg)
    for k in a.params:
        np.testing.assert_array_equal(a.params[k], b.params[k])
    assert [s.train_loss for s in ta] == [s.train_loss for s in tb]


def test_train_rejects_bad_datasets():
    with pytest.raises(DataError):
        train(SPEC, ArrayDataset(np.zeros((0, 6, 204, 1)), []), TrainConfig(batch_size=8, epochs=1))
    with pytest.raises(DataError):
        train(SPEC, ArrayDataset(np.zeros((4, 6, 204, 1)), [0, 1, 2, 0]), TrainConfig(batch_size=8, epochs=1))


def test_validation_metrics_and_trace_csv(tmp_path):
    data = separable(n=40)
    _, trace = train(SPEC, data, TrainConfig(batch_size=16, epochs=2), val=separable(n=10, seed=3))
    assert all(s.val_loss is not None for s in trace)
    path = tmp_path / "trace.csv"
    write_trace_csv(path, trace)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,train_loss,train_acc,val_loss,val_acc"
    assert len(lines) == 3
