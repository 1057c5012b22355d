import numpy as np
import pytest

from archimax import nn
from archimax.errors import TrainingDivergenceError


def _zero_net(input_dim, hidden, out, head):
    net = nn.GenerativeNet(input_dim, hidden, out, head, rng=0)
    for key in net.params:
        net.params[key][:] = 0.0
    net.params["gamma0"][:] = 1.0
    net.params["gamma1"][:] = 1.0
    return net


def test_zero_weight_simplex_head_is_uniform():
    net = _zero_net(4, 6, 4, nn.SIMPLEX_HEAD)
    out = net.sample(5, 1)
    np.testing.assert_allclose(out, 0.25)


def test_zero_weight_positive_head_is_one():
    net = _zero_net(1, 5, 1, nn.POSITIVE_HEAD)
    np.testing.assert_allclose(net.sample(4, 2), 1.0)


def test_sampling_determinism_bit_identical():
    net = nn.GenerativeNet(3, 8, 3, nn.SIMPLEX_HEAD, rng=7)
    a = net.sample(11, 42)
    b = net.sample(11, 42)
    assert np.array_equal(a, b)


def test_simplex_head_rows_sum_to_one_and_positive():
    net = nn.GenerativeNet(5, 10, 5, nn.SIMPLEX_HEAD, rng=3)
    out = net.sample(200, 0)
    np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-9)
    assert out.min() > 0


def test_backward_mean_loss_matches_finite_differences():
    net = _zero_net(3, 4, 3, nn.SIMPLEX_HEAD)
    loss_fn = lambda out: (float(out.mean()), np.full_like(out, 1.0 / out.size))
    assert nn.gradient_check(net, loss_fn, count=8, seed=1) == 1.0


def test_backward_constant_loss_zero_gradients():
    net = nn.GenerativeNet(3, 4, 3, nn.SIMPLEX_HEAD, rng=2)
    loss_fn = lambda out: (1.0, np.zeros_like(out))
    _, grads = nn.backward(net, loss_fn, count=8, seed=1)
    assert all(np.all(g == 0) for g in grads.values())


def test_softmax_gradient_orthogonal_to_ones():
    # d(loss)/d(logits) must lie in the softmax Jacobian range, which is
    # orthogonal to the all-ones direction row by row
    net = nn.GenerativeNet(3, 4, 3, nn.SIMPLEX_HEAD, rng=5)
    rng = np.random.default_rng(0)
    noise = rng.standard_normal((6, 3))
    out, cache = net.forward(noise, mode="training")
    dout = 2 * out  # loss = sum of squares
    inner = (dout * out).sum(axis=1, keepdims=True)
    dlogits = out * (dout - inner)
    np.testing.assert_allclose(dlogits.sum(axis=1), 0.0, atol=1e-12)


def test_gradient_check_random_nets():
    net = nn.GenerativeNet(4, 6, 4, nn.SIMPLEX_HEAD, rng=11)
    sq = lambda out: (float((out**2).sum()), 2 * out)
    assert nn.gradient_check(net, sq, count=12, seed=3) >= 0.95
    net2 = nn.GenerativeNet(1, 5, 1, nn.POSITIVE_HEAD, rng=12)
    mean = lambda out: (float(out.mean()), np.full_like(out, 1.0 / out.size))
    assert nn.gradient_check(net2, mean, count=12, seed=4) >= 0.95


def test_backward_raises_on_nonfinite_loss():
    net = nn.GenerativeNet(2, 4, 2, nn.SIMPLEX_HEAD, rng=0)
    bad = lambda out: (float("nan"), np.zeros_like(out))
    with pytest.raises(TrainingDivergenceError):
        nn.backward(net, bad, count=4, seed=0)


def test_adam_first_step_is_signed_learning_rate():
    net = _zero_net(1, 5, 1, nn.POSITIVE_HEAD)
    cfg = nn.TrainConfig(learning_rate=1e-3)
    state = nn.AdamState()
    grads = {"W0": np.full_like(net.params["W0"], 0.37)}
    before = net.params["W0"].copy()
    nn.adam_step(net, grads, cfg, state)
    np.testing.assert_allclose(net.params["W0"] - before, -1e-3, rtol=1e-6)


def test_adam_zero_gradient_keeps_parameter():
    net = nn.GenerativeNet(2, 4, 2, nn.SIMPLEX_HEAD, rng=1)
    cfg = nn.TrainConfig()
    state = nn.AdamState()
    before = net.params["b1"].copy()
    nn.adam_step(net, {"b1": np.zeros_like(before)}, cfg, state)
    np.testing.assert_array_equal(net.params["b1"], before)


def test_adam_constant_gradient_moves_monotonically():
    net = _zero_net(1, 5, 1, nn.POSITIVE_HEAD)
    cfg = nn.TrainConfig(learning_rate=1e-3)
    state = nn.AdamState()
    vals = [net.params["b2"].copy()]
    for _ in range(3):
        nn.adam_step(net, {"b2": np.full_like(net.params["b2"], 2.0)}, cfg, state)
        vals.append(net.params["b2"].copy())
    diffs = np.diff(np.array(vals).ravel())
    assert np.all(diffs < 0)


def test_json_round_trip_value_exact():
    net = nn.GenerativeNet(3, 7, 3, nn.SIMPLEX_HEAD, rng=9)
    net.running_mean[0][:] = np.random.default_rng(0).normal(size=7)
    doc = net.to_json()
    back = nn.GenerativeNet.from_json(doc)
    for key in net.params:
        np.testing.assert_array_equal(net.params[key], back.params[key])
    for i in range(2):
        np.testing.assert_array_equal(net.running_mean[i], back.running_mean[i])
        np.testing.assert_array_equal(net.running_var[i], back.running_var[i])
    assert np.array_equal(net.sample(5, 3), back.sample(5, 3))
