import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from distillab.nets import DenseNet, ShapeError, finite_difference_grads, max_relative_error


def random_net(rng, widths, activations):
    net = DenseNet.create(widths, activations, rng=rng, dtype=np.float64)
    for b in net.biases:
        b[...] = rng.normal(scale=0.3, size=b.shape)
    return net


def test_zero_weight_net_outputs_last_bias():
    net = DenseNet.create([5, 4, 3], "tanh", dtype=np.float64)
    for w in net.weights:
        w[...] = 0.0
    net.biases[-1][...] = [1.0, -2.0, 0.5]
    out = net.forward(np.ones(5))
    np.testing.assert_array_equal(out, [1.0, -2.0, 0.5])


def test_single_identity_layer_is_identity():
    net = DenseNet.create([4, 4], ["identity"], dtype=np.float64)
    net.weights[0][...] = np.eye(4)
    v = np.array([0.1, -3.0, 2.5, 0.0])
    np.testing.assert_array_equal(net.forward(v), v)


def test_forward_matches_hand_computed_matrix_chain():
    rng = np.random.default_rng(11)
    net = random_net(rng, [8, 16, 4], ["tanh", "identity"])
    x = rng.normal(size=(6, 8))
    # independent explicit chain, no shared code path
    h = np.tanh(x @ net.weights[0] + net.biases[0])
    expected = h @ net.weights[1] + net.biases[1]
    np.testing.assert_allclose(net.forward(x), expected, rtol=0, atol=1e-12)


def test_forward_shape_mismatch_raises():
    net = DenseNet.create([3, 2])
    with pytest.raises(ShapeError):
        net.forward(np.zeros(4))


def test_forward_deterministic_and_finite():
    net = DenseNet.create([6, 32, 32, 2], "relu", rng=np.random.default_rng(3))
    x = np.random.default_rng(4).normal(size=(10, 6)).astype(np.float32)
    a = net.forward(x)
    b = net.forward(x)
    np.testing.assert_array_equal(a, b)
    assert np.all(np.isfinite(a))


def test_batch_rows_match_single_vectors():
    net = DenseNet.create([5, 9, 3], "tanh", rng=np.random.default_rng(8), dtype=np.float64)
    x = np.random.default_rng(9).normal(size=(4, 5))
    batch = net.forward(x)
    for i in range(4):
        np.testing.assert_allclose(net.forward(x[i]), batch[i], atol=1e-12)


def test_backward_before_forward_raises():
    net = DenseNet.create([3, 2])
    with pytest.raises(RuntimeError):
        net.backward(np.zeros(2))


def test_gradient_zero_for_disconnected_parameter():
    # columns of the output weight feeding output 1 cannot affect output 0
    net = DenseNet.create([3, 4, 2], "tanh", rng=np.random.default_rng(5), dtype=np.float64)
    net.forward(np.array([0.3, -0.2, 0.9]))
    tape = net.backward(np.array([1.0, 0.0]))
    assert np.all(tape.weight_grads[-1][:, 1] == 0.0)
    assert tape.bias_grads[-1][1] == 0.0


def test_linear_net_matches_closed_form_least_squares_gradient():
    rng = np.random.default_rng(21)
    x = rng.normal(size=(7, 4))
    y = rng.normal(size=(7, 1))
    net = DenseNet.create([4, 1], ["identity"], dtype=np.float64)
    net.weights[0][...] = rng.normal(size=(4, 1))
    pred = net.forward(x)
    tape = net.backward(2.0 * (pred - y))  # d/dpred sum((pred-y)^2)
    w = net.weights[0]
    np.testing.assert_allclose(tape.weight_grads[0], 2.0 * x.T @ (x @ w - y), atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_gradients_match_finite_differences(data):
    depth = data.draw(st.integers(2, 4), label="depth")
    widths = [data.draw(st.integers(1, 8), label=f"w{i}") for i in range(depth)]
    acts = [data.draw(st.sampled_from(["tanh", "relu", "identity"]), label=f"a{i}") for i in range(depth - 1)]
    seed = data.draw(st.integers(0, 2**31 - 1), label="seed")
    rng = np.random.default_rng(seed)
    net = random_net(rng, widths, acts)
    x = rng.normal(size=(3, widths[0]))
    upstream = rng.normal(size=(3, widths[-1]))
    net.forward(x)
    # central differences straddle the relu kink; keep pre-activations away from it
    for z, act in zip(net._pre_acts, net.activations):
        if act == "relu":
            assume(float(np.min(np.abs(z))) > 1e-3)
    analytic = net.backward(upstream)
    numeric = finite_difference_grads(net, x, upstream, h=1e-5)
    assert max_relative_error(analytic, numeric) <= 1e-4


def test_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(33)
    net = random_net(rng, [5, 7, 2], ["tanh", "identity"])
    x = rng.normal(size=(2, 5))
    upstream = rng.normal(size=(2, 2))
    net.forward(x)
    tape = net.backward(upstream)
    h = 1e-6
    fd = np.zeros_like(x)
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            bumped = x.copy()
            bumped[i, j] += h
            hi = float(np.sum(net.forward(bumped) * upstream))
            bumped[i, j] -= 2 * h
            lo = float(np.sum(net.forward(bumped) * upstream))
            fd[i, j] = (hi - lo) / (2 * h)
    np.testing.assert_allclose(tape.input_grad, fd, rtol=1e-6, atol=1e-8)


def test_copy_is_deep():
    net = DenseNet.create([3, 3], rng=np.random.default_rng(1))
    clone = net.copy()
    clone.weights[0][0, 0] += 1.0
    assert net.weights[0][0, 0] != clone.weights[0][0, 0]


def ln_net(rng, widths, activations):
    net = DenseNet.create(widths, activations, rng=rng, dtype=np.float64, layer_norm=True)
    for b in net.biases:
        b[...] = rng.normal(scale=0.3, size=b.shape)
    for g in net.ln_gains:
        g[...] = rng.uniform(0.5, 1.5, size=g.shape)
    for b in net.ln_biases:
        b[...] = rng.normal(scale=0.2, size=b.shape)
    return net


def test_layer_norm_normalizes_hidden_preactivations():
    rng = np.random.default_rng(40)
    net = DenseNet.create([6, 32, 2], "tanh", rng=rng, dtype=np.float64, layer_norm=True)
    net.forward(rng.normal(size=(5, 6)) * 10.0)
    y = net._pre_acts[0]  # gain 1, bias 0 at init, so y is the normalized signal
    np.testing.assert_allclose(y.mean(axis=1), 0.0, atol=1e-9)
    np.testing.assert_allclose(y.std(axis=1), 1.0, atol=1e-3)


def test_layer_norm_invariant_to_rowwise_affine_input():
    net = DenseNet.create([4, 4, 1], "identity", dtype=np.float64, layer_norm=True)
    net.weights[0][...] = np.eye(4)
    x = np.random.default_rng(41).normal(size=(3, 4))
    a = net.forward(x)
    b = net.forward(5.0 * x + 7.0)  # same shift and scale across features
    np.testing.assert_allclose(a, b, atol=1e-4)  # exact only at LN_EPS = 0


def test_layer_norm_gradients_match_finite_differences():
    rng = np.random.default_rng(42)
    for acts in (["tanh", "tanh", "identity"], ["relu", "relu", "identity"]):
        net = ln_net(rng, [5, 8, 6, 2], acts)
        x = rng.normal(size=(4, 5))
        upstream = rng.normal(size=(4, 2))
        net.forward(x)
        analytic = net.backward(upstream)
        numeric = finite_difference_grads(net, x, upstream, h=1e-6)
        assert max_relative_error(analytic, numeric) <= 1e-4


def test_layer_norm_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(43)
    net = ln_net(rng, [5, 7, 2], ["tanh", "identity"])
    x = rng.normal(size=(2, 5))
    upstream = rng.normal(size=(2, 2))
    net.forward(x)
    tape = net.backward(upstream)
    h = 1e-6
    fd = np.zeros_like(x)
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            bumped = x.copy()
            bumped[i, j] += h
            hi = float(np.sum(net.forward(bumped) * upstream))
            bumped[i, j] -= 2 * h
            lo = float(np.sum(net.forward(bumped) * upstream))
            fd[i, j] = (hi - lo) / (2 * h)
    np.testing.assert_allclose(tape.input_grad, fd, rtol=1e-5, atol=1e-8)


def test_layer_norm_params_roundtrip_and_deep_copy():
    net = DenseNet.create([3, 5, 1], "relu", rng=np.random.default_rng(2), layer_norm=True)
    assert len(net.params()) == 2 * 2 + 2 * 1  # (w, b) per layer plus (gain, bias) per hidden
    clone = net.copy()
    clone.ln_gains[0][0] += 1.0
    assert net.ln_gains[0][0] != clone.ln_gains[0][0]
