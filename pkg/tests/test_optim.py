import numpy as np
import pytest

from distillab.nets import AdamState, DenseNet, TrainingError, optimize_step


def test_zero_gradients_leave_parameters_unchanged():
    params = [np.array([1.0, -2.0]), np.array([[0.5]])]
    before = [p.copy() for p in params]
    opt = AdamState.for_params(params, learning_rate=0.1)
    opt.step(params, [np.zeros_like(p) for p in params])
    for p, b in zip(params, before):
        np.testing.assert_array_equal(p, b)
    assert opt.step_count == 1


def test_zero_learning_rate_leaves_parameters_unchanged():
    params = [np.array([1.0, -2.0])]
    opt = AdamState.for_params(params, learning_rate=0.0)
    opt.step(params, [np.array([3.0, -4.0])])
    np.testing.assert_array_equal(params[0], [1.0, -2.0])


def test_converges_on_convex_quadratic():
    # loss = 0.5 * sum((p - target)^2), unique optimum at target
    rng = np.random.default_rng(0)
    target = rng.normal(size=12)
    params = [rng.normal(size=12)]
    opt = AdamState.for_params(params, learning_rate=0.04)
    losses = []
    for _ in range(200):
        grad = params[0] - target
        losses.append(0.5 * float(np.sum(grad**2)))
        opt.step(params, [grad])
    losses.append(0.5 * float(np.sum((params[0] - target) ** 2)))
    assert losses[-1] <= 1e-6
    # monotone from warmup until inside the convergence band
    warmup = 50
    reached = next(i for i, loss in enumerate(losses) if loss <= 1e-6)
    tail = losses[warmup : reached + 1]
    assert all(b <= a + 1e-12 for a, b in zip(tail, tail[1:]))


def test_nan_gradient_raises_with_diagnostics():
    params = [np.zeros(3)]
    opt = AdamState.for_params(params)
    bad = np.array([0.0, np.nan, 0.0])
    with pytest.raises(TrainingError, match="non-finite"):
        opt.step(params, [bad])


def test_optimize_step_applies_tape():
    net = DenseNet.create([2, 2], rng=np.random.default_rng(2), dtype=np.float64)
    opt = AdamState.for_params(net.params(), learning_rate=0.01)
    net.forward(np.array([1.0, -1.0]))
    tape = net.backward(np.array([1.0, 1.0]))
    before = net.weights[0].copy()
    optimize_step(net, tape, opt)
    assert np.any(net.weights[0] != before)
    assert opt.step_count == 1
