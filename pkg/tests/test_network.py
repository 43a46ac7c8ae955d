import math

import numpy as np
import pytest

from harcnn.data import GROUPS
from harcnn.errors import ShapeError
from harcnn.nn import layers as L
from harcnn.nn.checkpoint import load_checkpoint, save_checkpoint
from harcnn.nn.gradcheck import check_network
from harcnn.nn.network import (
    NetworkSpec,
    init_state,
    network_backward,
    network_forward,
    predict_proba,
    zero_state,
)


@pytest.mark.parametrize("n_sensors", [1, 2, 3])
def test_shape_trace(n_sensors):
    spec = NetworkSpec(channels=n_sensors, output_units=4)
    c = n_sensors
    assert spec.shape_trace() == [
        (6, 204, c),
        (6, 204, 8 * c),
        (2, 68, 8 * c),
        (2, 68, 32 * c),
        (1, 34, 32 * c),
        (1, 34, 64 * c),
        (1, 17, 64 * c),
    ]
    assert spec.flat_size == 1088 * n_sensors


@pytest.mark.parametrize("group", list(GROUPS.values()), ids=list(GROUPS))
def test_forward_shapes_per_group(group, rng):
    spec = NetworkSpec(channels=2, output_units=group.m)
    state = init_state(spec, seed=1)
    trace = []
    logits, _ = network_forward(spec, state, rng.normal(size=(2, 6, 204, 2)), "infer", trace=trace)
    assert logits.shape == (2, group.m)
    shapes = dict(trace)
    assert shapes["pool3"] == (2, 1, 17, 128)
    assert shapes["flatten"] == (2, 2176)


def test_parameter_shapes():
    spec = NetworkSpec(channels=3, output_units=7)
    p = init_state(spec).params
    assert p["conv1.w"].shape == (3, 5, 3, 8)
    assert p["conv2.w"].shape == (2, 4, 24, 4)
    assert p["conv3.w"].shape == (2, 2, 96, 2)
    assert p["dense1.w"].shape == (3264, 500)
    assert p["dense4.w"].shape == (125, 7)


def test_init_is_he_uniform():
    spec = NetworkSpec(channels=2, output_units=3)
    p = init_state(spec, seed=0).params
    assert np.abs(p["conv1.w"]).max() <= math.sqrt(6 / 15)
    assert np.abs(p["dense1.w"]).max() <= math.sqrt(6 / spec.flat_size)
    # uniform on [-a, a] has variance a^2 / 3 = 2 / fan_in
    assert p["dense1.w"].var() == pytest.approx(2 / spec.flat_size, rel=0.02)
    assert not p["dense2.b"].any()


def test_zero_weights_give_uniform_prediction(rng):
    for m in (2, 3, 7):
        spec = NetworkSpec.small(channels=1, output_units=m)
        state = zero_state(spec)
        x = rng.normal(size=(3, 6, 204, 1))
        logits, _ = network_forward(spec, state, x, "train", rng=rng)
        loss, _, _ = L.softmax_cross_entropy(logits, [0, m - 1, 0])
        assert loss == pytest.approx(math.log(m), abs=1e-12)


def test_bad_input_shape(rng):
    spec = NetworkSpec.small(channels=2, output_units=3)
    with pytest.raises(ShapeError):
        network_forward(spec, init_state(spec), rng.normal(size=(2, 6, 204, 1)), "infer")


def test_end_to_end_gradient_check():
    row = check_network(np.random.default_rng(0))
    assert row.fraction_ok >= 0.99 and row.passed
    assert row.checked > 400


def test_input_gradient_present_only_on_request(rng):
    spec = NetworkSpec.small(channels=1, output_units=3)
    state = init_state(spec)
    x = rng.normal(size=(2, 6, 204, 1))
    logits, caches = network_forward(spec, state, x, "train", rng=rng, update_stats=False)
    g = L.softmax_cross_entropy(logits, [0, 1])[1]
    assert "input" not in network_backward(spec, state, caches, g)
    grads = network_backward(spec, state, caches, g, input_grad=True)
    assert grads["input"].shape == x.shape
    assert set(grads) - {"input"} == set(state.params)


def test_forward_is_deterministic(rng):
    spec = NetworkSpec.small(channels=2, output_units=3)
    x = rng.normal(size=(4, 6, 204, 2))
    a = network_forward(spec, init_state(spec, 7), x, "train", rng=np.random.default_rng(1))[0]
    b = network_forward(spec, init_state(spec, 7), x, "train", rng=np.random.default_rng(1))[0]
    np.testing.assert_array_equal(a, b)


def test_train_mode_updates_running_stats_infer_does_not(rng):
    spec = NetworkSpec.small(channels=1, output_units=2)
    state = init_state(spec)
    x = rng.normal(size=(4, 6, 204, 1))
    network_forward(spec, state, x, "infer")
    assert not state.buffers["bn1.running_mean"].any()
    network_forward(spec, state, x, "train", rng=rng)
    assert state.buffers["bn1.running_mean"].any()


def test_predict_proba_rows_sum_to_one(rng):
    spec = NetworkSpec.small(channels=1, output_units=4)
    p = predict_proba(spec, init_state(spec), rng.normal(size=(5, 6, 204, 1)), batch_size=2)
    assert p.shape == (5, 4)
    np.testing.assert_allclose(p.sum(axis=1), 1, atol=1e-12)


def test_checkpoint_round_trip(tmp_path, rng):
    spec = NetworkSpec.small(channels=2, output_units=3)
    state = init_state(spec, seed=4)
    state.buffers["bn2.running_var"][:] = rng.uniform(size=state.buffers["bn2.running_var"].shape)
    a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(a, spec, state, {"group": "walk"})
    spec2, state2, meta = load_checkpoint(a)
    assert spec2 == spec and meta == {"group": "walk"} and state2.seed == 4
    for k in state.params:
        np.testing.assert_array_equal(state.params[k], state2.params[k])
    save_checkpoint(b, spec2, state2, meta)
    assert a.read_bytes() == b.read_bytes()


def test_checkpoint_rejects_garbage(tmp_path):
    from harcnn.errors import DataError

    p = tmp_path / "x.ckpt"
    p.write_bytes(b"nope")
    with pytest.raises(DataError):
        load_checkpoint(p)
