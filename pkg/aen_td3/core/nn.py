"""Minimal feedforward networks with analytic gradients and Adam.

Every network in the package (critics, actors, action estimators and their
targets) is an ``MlpNetwork``: a chain of fully connected layers with
explicit weight and bias arrays held in double precision. ``forward`` and
``backward`` accept either one input vector or a 2-D batch whose rows are
samples; batched parameter gradients are summed over the rows.

Weights are stored as ``(output_dim, input_dim)`` matrices, so one layer
computes ``x @ W.T + b``. A network whose last layer uses ``Activation.TANH``
multiplies the tanh output by ``output_scale``; that is the only place the
scale is applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np

from ..errors import CheckpointError, ShapeError

NETWORK_FORMAT = "aen-td3/network"
NETWORK_FORMAT_VERSION = 1

RngLike = Union[np.random.Generator, int, None]


class Activation(Enum):
    """Elementwise nonlinearity applied after a layer's affine map."""
    RELU = "relu"
    TANH = "tanh"
    IDENTITY = "identity"


class Direction(Enum):
    """Whether an optimizer step descends or ascends the objective."""
    MINIMIZE = "minimize"
    MAXIMIZE = "maximize"


@dataclass(frozen=True)
class LayerSpec:
    """Shape and activation of one fully connected layer."""
    input_dim: int
    output_dim: int
    activation: Activation = Activation.IDENTITY

    def __post_init__(self) -> None:
        if isinstance(self.activation, str):
            try:
                object.__setattr__(self, "activation", Activation(self.activation.lower()))
            except ValueError:
                raise ShapeError(f"Unknown activation: {self.activation!r}")
        if not isinstance(self.activation, Activation):
            raise ShapeError(f"Unknown activation: {self.activation!r}")
        if int(self.input_dim) <= 0 or int(self.output_dim) <= 0:
            raise ShapeError(
                f"Layer dimensions must be positive, got {self.input_dim}->{self.output_dim}"
            )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "input_dim": int(self.input_dim),
            "output_dim": int(self.output_dim),
            "activation": self.activation.value,
        }


@dataclass
class Gradients:
    """Per-layer arrays laid out exactly like a network's weights and biases."""
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    @classmethod
    def zeros_like(cls, net: "MlpNetwork") -> "Gradients":
        return cls(
            weights=[np.zeros_like(w) for w in net.weights],
            biases=[np.zeros_like(b) for b in net.biases],
        )

    def flat(self) -> np.ndarray:
        """Row-major concatenation: layer by layer, weights then biases."""
        parts: List[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b.ravel())
        return np.concatenate(parts) if parts else np.zeros(0)

    def scaled(self, factor: float) -> "Gradients":
        return Gradients(
            weights=[w * factor for w in self.weights],
            biases=[b * factor for b in self.biases],
        )

    def copy(self) -> "Gradients":
        return Gradients(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )


@dataclass
class MlpNetwork:
    """A chain of fully connected layers with explicit parameters."""
    layers: Tuple[LayerSpec, ...]
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    output_scale: float = 1.0

    def __post_init__(self) -> None:
        self.layers = tuple(self.layers)
        _check_chain(self.layers)
        if len(self.weights) != len(self.layers) or len(self.biases) != len(self.layers):
            raise ShapeError("One weight matrix and one bias vector are needed per layer")
        for k, layer in enumerate(self.layers):
            if self.weights[k].shape != (layer.output_dim, layer.input_dim):
                raise ShapeError(
                    f"Layer {k} weight shape {self.weights[k].shape} does not match "
                    f"{(layer.output_dim, layer.input_dim)}"
                )
            if self.biases[k].shape != (layer.output_dim,):
                raise ShapeError(f"Layer {k} bias shape {self.biases[k].shape} is wrong")
        self.output_scale = float(self.output_scale)

    @property
    def input_dim(self) -> int:
        return self.layers[0].input_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].output_dim

    @property
    def has_tanh_head(self) -> bool:
        return self.layers[-1].activation is Activation.TANH

    @property
    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "MlpNetwork":
        return MlpNetwork(
            layers=self.layers,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            output_scale=self.output_scale,
        )

    def __repr__(self) -> str:
        dims = " -> ".join([str(self.input_dim)] + [str(l.output_dim) for l in self.layers])
        return f"MlpNetwork({dims}, head={self.layers[-1].activation.value})"


@dataclass
class AdamState:
    """Adam moments for one network plus its hyperparameters."""
    first_moment: Gradients
    second_moment: Gradients
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    learning_rate: float = 1e-3


def as_rng(rng: RngLike) -> np.random.Generator:
    """Accept a Generator or a seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _check_chain(layers: Sequence[LayerSpec]) -> None:
    if not layers:
        raise ShapeError("A network needs at least one layer")
    for k in range(len(layers) - 1):
        if layers[k].output_dim != layers[k + 1].input_dim:
            raise ShapeError(
                f"Layer {k} outputs {layers[k].output_dim} values but layer {k + 1} "
                f"expects {layers[k + 1].input_dim}"
            )


def mlp_spec(input_dim: int, width: int, output_dim: int, head: Activation) -> List[LayerSpec]:
    """Two ReLU hidden layers of ``width`` units followed by the output layer."""
    return [
        LayerSpec(input_dim, width, Activation.RELU),
        LayerSpec(width, width, Activation.RELU),
        LayerSpec(width, output_dim, head),
    ]


def init_network(spec: Sequence[LayerSpec], output_scale: float, rng: RngLike) -> MlpNetwork:
    """Fan-in uniform weights in [-1/sqrt(fan_in), 1/sqrt(fan_in)], zero biases."""
    layers = tuple(spec)
    _check_chain(layers)
    gen = as_rng(rng)
    weights = []
    biases = []
    for layer in layers:
        bound = 1.0 / math.sqrt(layer.input_dim)
        weights.append(gen.uniform(-bound, bound, size=(layer.output_dim, layer.input_dim)))
        biases.append(np.zeros(layer.output_dim))
    return MlpNetwork(layers=layers, weights=weights, biases=biases, output_scale=output_scale)


def _as_input(net: MlpNetwork, x: Any) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim not in (1, 2) or arr.shape[-1] != net.input_dim:
        raise ShapeError(f"Expected input with {net.input_dim} features, got shape {arr.shape}")
    return arr


def _activate(net: MlpNetwork, k: int, z: np.ndarray) -> np.ndarray:
    activation = net.layers[k].activation
    if activation is Activation.RELU:
        return np.where(z > 0.0, z, 0.0)
    if activation is Activation.TANH:
        out = np.tanh(z)
        if k == len(net.layers) - 1:
            out = out * net.output_scale
        return out
    return z


def _activation_slope(net: MlpNetwork, k: int, z: np.ndarray) -> np.ndarray:
    activation = net.layers[k].activation
    if activation is Activation.RELU:
        # subgradient at exactly 0 is 0
        return (z > 0.0).astype(np.float64)
    if activation is Activation.TANH:
        t = np.tanh(z)
        slope = 1.0 - t * t
        if k == len(net.layers) - 1:
            slope = slope * net.output_scale
        return slope
    return np.ones_like(z)


def _forward_trace(net: MlpNetwork, x: np.ndarray) -> Tuple[List[np.ndarray], List[np.ndarray], np.ndarray]:
    inputs: List[np.ndarray] = []
    pre_activations: List[np.ndarray] = []
    h = x
    for k in range(len(net.layers)):
        inputs.append(h)
        z = h @ net.weights[k].T + net.biases[k]
        pre_activations.append(z)
        h = _activate(net, k, z)
    return inputs, pre_activations, h


def forward(net: MlpNetwork, x: Any) -> np.ndarray:
    """Evaluate the network on one vector or a batch of row vectors."""
    return _forward_trace(net, _as_input(net, x))[2]


def backward(net: MlpNetwork, x: Any, upstream_gradient: Any) -> Tuple[Gradients, np.ndarray]:
    """Gradients of ``upstream_gradient . forward(net, x)``.

    Returns the parameter gradients (summed over batch rows) and the
    gradient with respect to the input, shaped like ``x``.
    """
    inputs_arr = _as_input(net, x)
    g = np.asarray(upstream_gradient, dtype=np.float64)
    expected = inputs_arr.shape[:-1] + (net.output_dim,)
    if g.shape != expected:
        raise ShapeError(f"Upstream gradient shape {g.shape} does not match output shape {expected}")

    inputs, pre_activations, _ = _forward_trace(net, inputs_arr)
    batched = inputs_arr.ndim == 2
    weight_grads: List[np.ndarray] = [np.empty(0)] * len(net.layers)
    bias_grads: List[np.ndarray] = [np.empty(0)] * len(net.layers)

    for k in reversed(range(len(net.layers))):
        g = g * _activation_slope(net, k, pre_activations[k])
        if batched:
            weight_grads[k] = g.T @ inputs[k]
            bias_grads[k] = g.sum(axis=0)
        else:
            weight_grads[k] = np.outer(g, inputs[k])
            bias_grads[k] = g.copy()
        g = g @ net.weights[k]

    return Gradients(weights=weight_grads, biases=bias_grads), g


def same_layout(a: MlpNetwork, b: MlpNetwork) -> bool:
    return a.layers == b.layers


def check_gradient_layout(net: MlpNetwork, grads: Gradients) -> None:
    if len(grads.weights) != len(net.weights) or len(grads.biases) != len(net.biases):
        raise ShapeError("Gradient layer count does not match the network")
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        if grads.weights[k].shape != w.shape or grads.biases[k].shape != b.shape:
            raise ShapeError(f"Gradient shapes for layer {k} do not match the network")


def parameter_vector(net: MlpNetwork) -> np.ndarray:
    """All parameters flattened layer by layer, weights (row-major) then biases."""
    return Gradients(weights=net.weights, biases=net.biases).flat()


def with_parameters(net: MlpNetwork, vector: Any) -> MlpNetwork:
    """A copy of ``net`` whose parameters are read from a flat vector."""
    flat = np.asarray(vector, dtype=np.float64)
    if flat.shape != (net.parameter_count,):
        raise ShapeError(f"Expected {net.parameter_count} parameters, got shape {flat.shape}")
    weights = []
    biases = []
    offset = 0
    for w, b in zip(net.weights, net.biases):
        weights.append(flat[offset:offset + w.size].reshape(w.shape).copy())
        offset += w.size
        biases.append(flat[offset:offset + b.size].copy())
        offset += b.size
    return MlpNetwork(layers=net.layers, weights=weights, biases=biases, output_scale=net.output_scale)


def init_adam(
    net: MlpNetwork,
    learning_rate: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamState:
    return AdamState(
        first_moment=Gradients.zeros_like(net),
        second_moment=Gradients.zeros_like(net),
        step_count=0,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
        learning_rate=learning_rate,
    )


def adam_step(
    net: MlpNetwork,
    gradients: Gradients,
    state: AdamState,
    direction: Direction = Direction.MINIMIZE,
) -> Tuple[MlpNetwork, AdamState]:
    """One bias-corrected Adam step; ``MAXIMIZE`` negates the gradient first.

    Returns new network and state objects; the inputs are left untouched.
    """
    check_gradient_layout(net, gradients)
    check_gradient_layout(net, state.first_moment)
    check_gradient_layout(net, state.second_moment)

    grads = gradients if direction is Direction.MINIMIZE else gradients.scaled(-1.0)
    step = state.step_count + 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** step
    correction2 = 1.0 - b2 ** step

    def update(param: np.ndarray, g: np.ndarray, m: np.ndarray, v: np.ndarray):
        m_new = b1 * m + (1.0 - b1) * g
        v_new = b2 * v + (1.0 - b2) * (g * g)
        m_hat = m_new / correction1
        v_hat = v_new / correction2
        return param - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps), m_new, v_new

    new_w, new_b = [], []
    m_w, m_b, v_w, v_b = [], [], [], []
    for k in range(len(net.layers)):
        w, mw, vw = update(net.weights[k], grads.weights[k],
                           state.first_moment.weights[k], state.second_moment.weights[k])
        b, mb, vb = update(net.biases[k], grads.biases[k],
                           state.first_moment.biases[k], state.second_moment.biases[k])
        new_w.append(w)
        new_b.append(b)
        m_w.append(mw)
        m_b.append(mb)
        v_w.append(vw)
        v_b.append(vb)

    new_net = MlpNetwork(layers=net.layers, weights=new_w, biases=new_b, output_scale=net.output_scale)
    new_state = AdamState(
        first_moment=Gradients(weights=m_w, biases=m_b),
        second_moment=Gradients(weights=v_w, biases=v_b),
        step_count=step,
        beta1=state.beta1,
        beta2=state.beta2,
        eps=state.eps,
        learning_rate=state.learning_rate,
    )
    return new_net, new_state


# ----------------------------------------------------------------------
# Serialization
# ----------------------------------------------------------------------

def _array_lists(arrays: List[np.ndarray]) -> List[List[float]]:
    return [a.ravel().tolist() for a in arrays]


def network_to_dict(net: MlpNetwork) -> Dict[str, Any]:
    """Manifest plus flat row-major parameter lists; floats keep full precision."""
    return {
        "format": NETWORK_FORMAT,
        "version": NETWORK_FORMAT_VERSION,
        "layers": [layer.to_dict() for layer in net.layers],
        "output_scale": net.output_scale,
        "weights": _array_lists(net.weights),
        "biases": _array_lists(net.biases),
    }


def network_from_dict(data: Dict[str, Any]) -> MlpNetwork:
    if data.get("format") != NETWORK_FORMAT:
        raise CheckpointError(f"Not a network manifest: format={data.get('format')!r}")
    if data.get("version") != NETWORK_FORMAT_VERSION:
        raise CheckpointError(f"Unsupported network manifest version {data.get('version')!r}")
    try:
        layers = tuple(
            LayerSpec(l["input_dim"], l["output_dim"], Activation(l["activation"]))
            for l in data["layers"]
        )
        weights = [
            np.asarray(flat, dtype=np.float64).reshape(layer.output_dim, layer.input_dim)
            for flat, layer in zip(data["weights"], layers)
        ]
        biases = [np.asarray(flat, dtype=np.float64) for flat in data["biases"]]
        return MlpNetwork(layers=layers, weights=weights, biases=biases,
                          output_scale=float(data["output_scale"]))
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"Malformed network manifest: {e}") from e


def adam_to_dict(state: AdamState) -> Dict[str, Any]:
    return {
        "step_count": state.step_count,
        "beta1": state.beta1,
        "beta2": state.beta2,
        "eps": state.eps,
        "learning_rate": state.learning_rate,
        "first_moment": {
            "weights": _array_lists(state.first_moment.weights),
            "biases": _array_lists(state.first_moment.biases),
        },
        "second_moment": {
            "weights": _array_lists(state.second_moment.weights),
            "biases": _array_lists(state.second_moment.biases),
        },
    }


def adam_from_dict(data: Dict[str, Any], net: MlpNetwork) -> AdamState:
    """Rebuild optimizer state, shaping the moments after ``net``."""

    def moments(entry: Dict[str, Any]) -> Gradients:
        return Gradients(
            weights=[np.asarray(flat, dtype=np.float64).reshape(w.shape)
                     for flat, w in zip(entry["weights"], net.weights)],
            biases=[np.asarray(flat, dtype=np.float64).reshape(b.shape)
                    for flat, b in zip(entry["biases"], net.biases)],
        )

    try:
        state = AdamState(
            first_moment=moments(data["first_moment"]),
            second_moment=moments(data["second_moment"]),
            step_count=int(data["step_count"]),
            beta1=float(data["beta1"]),
            beta2=float(data["beta2"]),
            eps=float(data["eps"]),
            learning_rate=float(data["learning_rate"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"Malformed optimizer state: {e}") from e
    try:
        check_gradient_layout(net, state.first_moment)
        check_gradient_layout(net, state.second_moment)
    except ShapeError as e:
        raise CheckpointError(f"Optimizer state does not match its network: {e}") from e
    return state
