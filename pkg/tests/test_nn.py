"""Tests for the feedforward network, its gradients and Adam."""

import numpy as np
import pytest

from aen_td3.core.nn import (
    Activation,
    Direction,
    Gradients,
    LayerSpec,
    MlpNetwork,
    _forward_trace,
    adam_from_dict,
    adam_step,
    adam_to_dict,
    backward,
    forward,
    init_adam,
    init_network,
    mlp_spec,
    network_from_dict,
    network_to_dict,
    parameter_vector,
    with_parameters,
)
from aen_td3.errors import CheckpointError, ShapeError

FD_STEP = 1e-5
REL_TOL = 1e-4
KINK_MARGIN = 1e-4

# (input, width, output, head, output_scale)
GRADIENT_SHAPES = {
    "actor": (6, 128, 3, Activation.TANH, 0.04),
    "critic": (18, 128, 1, Activation.IDENTITY, 1.0),
    "aen": (6, 128, 3, Activation.TANH, 0.04),
    "centralized_critic": (18, 256, 1, Activation.IDENTITY, 1.0),
}


def relative_error(analytic, numeric):
    return np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)


def away_from_kinks(net, x):
    """True when no ReLU pre-activation is close enough to 0 for a finite difference to cross it."""
    _, pre, _ = _forward_trace(net, x)
    for k, layer in enumerate(net.layers):
        if layer.activation is Activation.RELU and np.min(np.abs(pre[k])) < KINK_MARGIN:
            return False
    return True


def sample_case(shape, seed, batch=2):
    n_in, width, n_out, head, scale = shape
    gen = np.random.default_rng(seed)
    net = init_network(mlp_spec(n_in, width, n_out, head), scale, gen)
    # non-zero biases so every parameter matters
    net = MlpNetwork(net.layers, net.weights, [gen.normal(0.0, 0.1, b.shape) for b in net.biases],
                     net.output_scale)
    for _ in range(100):
        x = gen.normal(size=(batch, n_in))
        if away_from_kinks(net, x):
            break
    upstream = gen.normal(size=(batch, n_out))
    return net, x, upstream, gen


def scalar_objective(net, x, upstream):
    return float(np.sum(forward(net, x) * upstream))


def check_parameter_gradients(net, x, upstream, gen, samples):
    grads, _ = backward(net, x, upstream)
    flat_grad = grads.flat()
    theta = parameter_vector(net)
    indices = gen.choice(theta.size, size=min(samples, theta.size), replace=False)
    for i in indices:
        plus, minus = theta.copy(), theta.copy()
        plus[i] += FD_STEP
        minus[i] -= FD_STEP
        numeric = (scalar_objective(with_parameters(net, plus), x, upstream)
                   - scalar_objective(with_parameters(net, minus), x, upstream)) / (2 * FD_STEP)
        assert relative_error(flat_grad[i], numeric) <= REL_TOL, f"parameter {i}"


def check_input_gradients(net, x, upstream):
    _, input_grad = backward(net, x, upstream)
    for r in range(x.shape[0]):
        for c in range(x.shape[1]):
            plus, minus = x.copy(), x.copy()
            plus[r, c] += FD_STEP
            minus[r, c] -= FD_STEP
            numeric = (scalar_objective(net, plus, upstream)
                       - scalar_objective(net, minus, upstream)) / (2 * FD_STEP)
            assert relative_error(input_grad[r, c], numeric) <= REL_TOL, f"input {(r, c)}"


class TestLayout:
    def test_layer_spec_rejects_bad_dims_and_activation(self):
        with pytest.raises(ShapeError):
            LayerSpec(0, 4)
        with pytest.raises(ShapeError):
            LayerSpec(2, 4, "softmax")

    def test_layer_spec_accepts_activation_names(self):
        assert LayerSpec(2, 3, "ReLU").activation is Activation.RELU

    def test_chain_mismatch_rejected(self):
        layers = (LayerSpec(2, 3), LayerSpec(4, 1))
        with pytest.raises(ShapeError):
            MlpNetwork(layers, [np.zeros((3, 2)), np.zeros((1, 4))], [np.zeros(3), np.zeros(1)])

    def test_init_uses_fan_in_bounds_and_zero_biases(self):
        net = init_network(mlp_spec(9, 16, 2, Activation.TANH), 0.04, 7)
        for layer, w, b in zip(net.layers, net.weights, net.biases):
            assert np.all(np.abs(w) <= 1.0 / np.sqrt(layer.input_dim))
            assert np.all(b == 0.0)

    def test_parameter_vector_round_trip(self):
        net = init_network(mlp_spec(3, 5, 2, Activation.IDENTITY), 1.0, 0)
        rebuilt = with_parameters(net, parameter_vector(net))
        assert np.array_equal(parameter_vector(rebuilt), parameter_vector(net))

    def test_with_parameters_rejects_wrong_length(self):
        net = init_network(mlp_spec(3, 5, 2, Activation.IDENTITY), 1.0, 0)
        with pytest.raises(ShapeError):
            with_parameters(net, np.zeros(net.parameter_count + 1))


class TestForward:
    def test_single_and_batched_inputs_agree(self):
        net = init_network(mlp_spec(4, 8, 3, Activation.TANH), 0.04, 3)
        x = np.random.default_rng(0).normal(size=(5, 4))
        batched = forward(net, x)
        assert batched.shape == (5, 3)
        for i in range(5):
            # BLAS may order the sums differently for a single row
            np.testing.assert_allclose(forward(net, x[i]), batched[i], rtol=1e-12, atol=1e-15)

    def test_tanh_head_is_scaled_into_bounds(self):
        net = init_network(mlp_spec(2, 8, 2, Activation.TANH), 0.04, 3)
        out = forward(net, np.full((50, 2), 100.0))
        assert np.all(np.abs(out) <= 0.04)

    def test_wrong_input_width_raises(self):
        net = init_network(mlp_spec(4, 8, 3, Activation.TANH), 0.04, 3)
        with pytest.raises(ShapeError):
            forward(net, np.zeros(5))

    def test_relu_subgradient_at_zero_is_zero(self):
        layers = (LayerSpec(1, 1, Activation.RELU), LayerSpec(1, 1, Activation.IDENTITY))
        net = MlpNetwork(layers, [np.ones((1, 1)), np.ones((1, 1))], [np.zeros(1), np.zeros(1)])
        grads, input_grad = backward(net, np.zeros(1), np.ones(1))
        assert input_grad[0] == 0.0
        assert grads.weights[0][0, 0] == 0.0


class TestGradients:
    @pytest.mark.parametrize("name", sorted(GRADIENT_SHAPES))
    def test_parameter_gradients_match_finite_differences(self, name):
        for seed in range(3):
            net, x, upstream, gen = sample_case(GRADIENT_SHAPES[name], seed)
            check_parameter_gradients(net, x, upstream, gen, samples=40)

    @pytest.mark.parametrize("name", sorted(GRADIENT_SHAPES))
    def test_input_gradients_match_finite_differences(self, name):
        for seed in range(3):
            net, x, upstream, _ = sample_case(GRADIENT_SHAPES[name], seed)
            check_input_gradients(net, x, upstream)

    @pytest.mark.slow
    @pytest.mark.parametrize("name", sorted(GRADIENT_SHAPES))
    def test_gradients_over_twenty_networks(self, name):
        for seed in range(20):
            net, x, upstream, gen = sample_case(GRADIENT_SHAPES[name], 100 + seed)
            check_parameter_gradients(net, x, upstream, gen, samples=200)
            check_input_gradients(net, x, upstream)

    def test_batched_gradients_are_row_sums(self):
        net, x, upstream, _ = sample_case((4, 16, 2, Activation.TANH, 0.5), 0, batch=3)
        total, _ = backward(net, x, upstream)
        parts = [backward(net, x[i], upstream[i])[0].flat() for i in range(3)]
        assert np.allclose(total.flat(), np.sum(parts, axis=0), rtol=1e-12, atol=1e-15)

    def test_upstream_shape_checked(self):
        net = init_network(mlp_spec(4, 8, 3, Activation.TANH), 0.04, 3)
        with pytest.raises(ShapeError):
            backward(net, np.zeros((2, 4)), np.zeros((2, 2)))


class TestAdam:
    def setup_method(self):
        self.net = init_network(mlp_spec(3, 4, 2, Activation.IDENTITY), 1.0, 11)
        self.grads = Gradients(
            weights=[np.full_like(w, 0.5) for w in self.net.weights],
            biases=[np.full_like(b, -2.0) for b in self.net.biases],
        )

    def test_first_step_moves_by_learning_rate_against_gradient(self):
        state = init_adam(self.net, 0.01)
        new_net, new_state = adam_step(self.net, self.grads, state, Direction.MINIMIZE)
        assert new_state.step_count == 1
        assert np.allclose(new_net.weights[0] - self.net.weights[0], -0.01, rtol=1e-6)
        assert np.allclose(new_net.biases[0] - self.net.biases[0], 0.01, rtol=1e-6)

    def test_maximize_moves_with_gradient(self):
        state = init_adam(self.net, 0.01)
        new_net, _ = adam_step(self.net, self.grads, state, Direction.MAXIMIZE)
        assert np.allclose(new_net.weights[0] - self.net.weights[0], 0.01, rtol=1e-6)

    def test_zero_gradient_leaves_parameters_unchanged(self):
        state = init_adam(self.net, 0.01)
        new_net, _ = adam_step(self.net, Gradients.zeros_like(self.net), state)
        assert np.array_equal(parameter_vector(new_net), parameter_vector(self.net))

    def test_inputs_are_not_mutated(self):
        state = init_adam(self.net, 0.01)
        before = parameter_vector(self.net).copy()
        adam_step(self.net, self.grads, state)
        assert np.array_equal(parameter_vector(self.net), before)
        assert state.step_count == 0

    def test_layout_mismatch_raises(self):
        other = init_network(mlp_spec(3, 5, 2, Activation.IDENTITY), 1.0, 0)
        with pytest.raises(ShapeError):
            adam_step(self.net, Gradients.zeros_like(other), init_adam(self.net, 0.01))


class TestSerialization:
    def test_network_round_trip_is_exact(self):
        net = init_network(mlp_spec(5, 7, 2, Activation.TANH), 0.04, 2)
        rebuilt = network_from_dict(network_to_dict(net))
        assert rebuilt.layers == net.layers
        assert rebuilt.output_scale == net.output_scale
        assert np.array_equal(parameter_vector(rebuilt), parameter_vector(net))

    def test_foreign_manifest_rejected(self):
        with pytest.raises(CheckpointError):
            network_from_dict({"format": "something-else", "version": 1})

    def test_adam_state_round_trip(self):
        net = init_network(mlp_spec(3, 4, 2, Activation.IDENTITY), 1.0, 11)
        grads, _ = backward(net, np.ones(3), np.ones(2))
        _, state = adam_step(net, grads, init_adam(net, 1e-3))
        rebuilt = adam_from_dict(adam_to_dict(state), net)
        assert rebuilt.step_count == 1
        assert np.array_equal(rebuilt.first_moment.flat(), state.first_moment.flat())
        assert np.array_equal(rebuilt.second_moment.flat(), state.second_moment.flat())
