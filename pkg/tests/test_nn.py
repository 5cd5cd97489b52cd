import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from trafficrl.errors import FormatError, ShapeError, UsageError
from trafficrl.nn import (
    LossCoeffs,
    PolicyValueNet,
    actor_critic_loss,
    dumps,
    grad_check,
    head_entropy,
    load,
    loads,
    relative_error,
    sample_action,
    save,
    softmax,
)
from trafficrl.nn.layers import Linear


def obs_for(variant, rng):
    return rng.uniform(0, 1, (8,) if variant == "single" else (4, 8))


def test_zero_network_is_uniform():
    for variant in ("single", "multi"):
        net = PolicyValueNet(variant, hidden=4, channels=2, zero=True)
        logits, value, _ = net.forward(obs_for(variant, np.random.default_rng(0)), net.initial_state())
        assert not logits.any() and value == 0.0
        assert np.allclose(softmax(logits), 1 / 9)


def test_forward_is_repeatable():
    net = PolicyValueNet("multi", channels=3, seed=5)
    x = obs_for("multi", np.random.default_rng(1))
    s = net.initial_state()
    a, b = net.forward(x, s), net.forward(x, s)
    assert np.array_equal(a[0], b[0]) and a[1] == b[1]


def test_variant_mismatch_names_layer():
    net = PolicyValueNet("single", hidden=4)
    with pytest.raises(ShapeError, match="input"):
        net.forward(np.zeros((4, 8)), net.initial_state())


def test_saturated_logits_pick_index():
    logits = np.zeros((4, 9))
    logits[:, 2] = 1000.0
    s = sample_action(logits, np.random.default_rng(0))
    assert s.indices.tolist() == [2, 2, 2, 2]
    assert math.exp(s.log_prob) == pytest.approx(1.0)


def test_uniform_entropy():
    s = sample_action(np.zeros((4, 9)), np.random.default_rng(0))
    assert s.entropy == pytest.approx(4 * math.log(9), abs=1e-12)
    assert round(s.entropy, 3) == 8.789


def test_sampling_frequencies_match_softmax():
    rng = np.random.default_rng(42)
    logits = rng.normal(0, 1, (4, 9))
    p = softmax(logits)
    n = 100_000
    counts = np.zeros((4, 9))
    draw = np.random.default_rng(7)
    for _ in range(n):
        counts[np.arange(4), sample_action(logits, draw).indices] += 1
    sigma = np.sqrt(n * p * (1 - p))
    assert (np.abs(counts - n * p) <= 3 * sigma + 1).all()


def test_backward_without_forward():
    net = PolicyValueNet("single", hidden=4)
    with pytest.raises(UsageError):
        net.backward(None, np.zeros((1, 4, 9)), np.zeros(1))


def test_linear_gradient_is_outer_product():
    layer = Linear("v", 3, 1)
    p = {"v.W": np.array([[0.2, -0.1, 0.4]]), "v.b": np.zeros(1)}
    x = np.array([1.0, 2.0, 3.0])
    _, cache = layer.forward(p, x)
    grads = {k: np.zeros_like(v) for k, v in p.items()}
    layer.backward(p, np.ones(1), cache, grads)
    assert np.array_equal(grads["v.W"], np.outer([1.0], x))
    assert grads["v.b"].tolist() == [1.0]


def test_zero_loss_gives_zero_gradients():
    net = PolicyValueNet("single", hidden=4, seed=1)
    rng = np.random.default_rng(0)
    trace = net.forward_sequence([obs_for("single", rng) for _ in range(3)], net.initial_state())
    grads = net.backward(trace, np.zeros((3, 4, 9)), np.zeros(3))
    assert all(not g.any() for g in grads.values())


def test_backward_shape_error():
    net = PolicyValueNet("single", hidden=4)
    trace = net.forward_sequence([np.zeros(8)], net.initial_state())
    with pytest.raises(ShapeError):
        net.backward(trace, np.zeros((2, 4, 9)), np.zeros(2))


@pytest.mark.parametrize("variant, kw", [
    ("single", dict(hidden=8)),
    ("single", dict(hidden=4, shared_trunk=False)),
    ("multi", dict(channels=2)),
])
def test_grad_check_small_nets(variant, kw):
    net = PolicyValueNet(variant, seed=3, **kw)
    report = grad_check(net)
    assert report.passed, report.worst
    assert set(report.errors) == {"policy", "value", "composite"}


def test_grad_check_catches_corruption():
    net = PolicyValueNet("single", hidden=4, seed=2)
    report = grad_check(net, kinds=("value",), corrupt=("value.b", 0))
    assert not report.passed
    kind, name, idx, err = report.worst
    assert (name, idx) == ("value.b", 0) and err > 1e-4
    assert ("value", "value.b", 0, err) in report.failures()


def test_relative_error_floor():
    assert relative_error(np.array([0.0]), np.array([1e-9]))[0] == pytest.approx(1e-4)
    assert relative_error(np.array([2.0]), np.array([1.0]))[0] == 0.5


def test_stepwise_equals_unrolled():
    for variant in ("single", "multi"):
        net = PolicyValueNet(variant, hidden=6, channels=3, seed=9)
        rng = np.random.default_rng(4)
        xs = [obs_for(variant, rng) for _ in range(5)]
        trace = net.forward_sequence(xs, net.initial_state())
        state = net.initial_state()
        for t, x in enumerate(xs):
            logits, value, state = net.forward(x, state)
            assert np.array_equal(logits, trace.logits[t])
            assert value == trace.values[t]
        for k in state.hidden:
            assert np.array_equal(state.hidden[k], trace.final_state.hidden[k])


@given(arrays(np.float64, (4, 9), elements=st.floats(-1e3, 1e3)))
def test_softmax_heads_normalised(logits):
    assert np.allclose(softmax(logits).sum(axis=1), 1.0, atol=1e-6)
    assert (head_entropy(logits) >= -1e-12).all()


def test_loss_zero_case():
    rng = np.random.default_rng(0)
    values = rng.normal(size=3)
    res = actor_critic_loss(rng.normal(size=(3, 4, 9)), values, rng.integers(0, 9, (3, 4)), values, np.zeros(3),
                            LossCoeffs(entropy_coeff=0.0))
    assert res.total == 0.0
    assert not res.dlogits.any() and not res.dvalues.any()


def test_policy_gradient_single_step():
    rng = np.random.default_rng(1)
    logits = rng.normal(size=(1, 4, 9))
    actions = np.array([[3, 0, 8, 5]])
    res = actor_critic_loss(logits, np.zeros(1), actions, np.zeros(1), np.ones(1),
                            LossCoeffs(value_coeff=0.0, entropy_coeff=0.0))
    onehot = np.zeros((1, 4, 9))
    onehot[0, np.arange(4), actions[0]] = 1.0
    assert np.allclose(res.dlogits, -(onehot - softmax(logits)), atol=1e-15)


def test_loss_length_mismatch():
    with pytest.raises(ValueError):
        actor_critic_loss(np.zeros((2, 4, 9)), np.zeros(3), np.zeros((2, 4), int), np.zeros(2), np.zeros(2))


def test_checkpoint_roundtrip(tmp_path):
    net = PolicyValueNet("multi", channels=3, shared_trunk=False, seed=8)
    path = save(net, tmp_path / "net.ckpt")
    back = load(path)
    assert back.config() == net.config()
    for k in net.param_names:
        assert np.array_equal(back.params[k], net.params[k])
    assert dumps(back) == dumps(net)


def test_checkpoint_rejects_garbage():
    blob = dumps(PolicyValueNet("single", hidden=3))
    with pytest.raises(FormatError):
        loads(b"NOTMAGIC" + blob[8:])
    with pytest.raises(FormatError):
        loads(blob[:-5])
