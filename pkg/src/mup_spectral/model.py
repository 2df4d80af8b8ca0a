"""Role-tagged MLP with recorded forward passes and exact manual backprop.

Layers carry a role (input / hidden / output) plus flags saying which of their
dimensions grow with model width; the scaling rules key off those flags. The
network is bias-free and the activation is applied after every layer except
the last.
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from .linalg import as_matrix


class LayerRole(str, enum.Enum):
    INPUT = "input"
    HIDDEN = "hidden"
    OUTPUT = "output"


class Activation(str, enum.Enum):
    IDENTITY = "identity"
    RELU = "relu"
    TANH = "tanh"


class LossKind(str, enum.Enum):
    MSE = "mse"
    SOFTMAX_CE = "softmax_ce"


class DivergenceError(RuntimeError):
    """Raised when a forward pass or update produces non-finite values."""


@dataclass(frozen=True)
class LayerSpec:
    fan_in: int
    fan_out: int
    role: LayerRole
    width_scaled_in: bool
    width_scaled_out: bool

    def __post_init__(self):
        if self.fan_in < 1 or self.fan_out < 1:
            raise ValueError("layer dimensions must be positive")
        if self.role == LayerRole.INPUT and self.width_scaled_in:
            raise ValueError("input layers have a width-independent fan_in")
        if self.role == LayerRole.OUTPUT and self.width_scaled_out:
            raise ValueError("output layers have a width-independent fan_out")


def mlp_specs(input_dim: int, width: int, output_dim: int, depth: int) -> list[LayerSpec]:
    """Specs for a depth-layer chain input_dim -> width -> ... -> width -> output_dim."""
    if depth < 2:
        raise ValueError("depth must be >= 2 (input and output layers)")
    specs = [LayerSpec(input_dim, width, LayerRole.INPUT, False, True)]
    for _ in range(depth - 2):
        specs.append(LayerSpec(width, width, LayerRole.HIDDEN, True, True))
    specs.append(LayerSpec(width, output_dim, LayerRole.OUTPUT, True, False))
    return specs


@dataclass
class Layer:
    spec: LayerSpec
    w: np.ndarray  # effective weight, fan_out x fan_in; multiplier already folded in
    multiplier: float

    @property
    def w_tilde(self) -> np.ndarray:
        return self.w / self.multiplier


@dataclass
class Mlp:
    layers: list[Layer]
    activation: Activation = Activation.IDENTITY

    @property
    def depth(self) -> int:
        return len(self.layers)

    def copy(self) -> "Mlp":
        return Mlp(
            layers=[Layer(l.spec, l.w.copy(), l.multiplier) for l in self.layers],
            activation=self.activation,
        )


def validate_chain(specs: list[LayerSpec]) -> None:
    if not specs:
        raise ValueError("at least one layer spec required")
    for a, b in zip(specs, specs[1:]):
        if a.fan_out != b.fan_in:
            raise ValueError(f"layer chain mismatch: fan_out {a.fan_out} vs fan_in {b.fan_in}")


def build(specs, scheme, optimizer_kind, seed: int, activation: Activation = Activation.IDENTITY) -> Mlp:
    """Initialize an MLP with per-layer multipliers from the scaling rules.

    The raw draw is always standard normal, scaled by the rule's init_std and
    weight multiplier; for a fixed seed the underlying sample is identical
    across schemes, so scheme comparisons differ only through the rules.
    """
    from .scaling import derive_rule  # local import: scaling depends on LayerSpec

    validate_chain(specs)
    rng = np.random.default_rng(seed)
    layers = []
    for spec in specs:
        rule = derive_rule(optimizer_kind, spec, scheme)
        z = rng.standard_normal((spec.fan_out, spec.fan_in))
        w = rule.weight_mult * (rule.init_std * z)
        layers.append(Layer(spec, w, rule.weight_mult))
    return Mlp(layers=layers, activation=activation)


def _act(kind: Activation, z: np.ndarray) -> np.ndarray:
    if kind == Activation.IDENTITY:
        return z
    if kind == Activation.RELU:
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _act_grad(kind: Activation, z: np.ndarray) -> np.ndarray:
    if kind == Activation.IDENTITY:
        return np.ones_like(z)
    if kind == Activation.RELU:
        return (z > 0.0).astype(np.float64)
    t = np.tanh(z)
    return 1.0 - t * t


@dataclass
class ForwardTrace:
    """features[l] is h_l (h_0 = input batch); layer_inputs[l] is what layer l+1 consumed."""

    features: list[np.ndarray] = field(default_factory=list)
    layer_inputs: list[np.ndarray] = field(default_factory=list)

    @property
    def output(self) -> np.ndarray:
        return self.features[-1]

    @property
    def batch_size(self) -> int:
        return self.features[0].shape[1]


def forward(mlp: Mlp, x) -> ForwardTrace:
    x = as_matrix(x, "input batch")
    if x.shape[0] != mlp.layers[0].spec.fan_in:
        raise ValueError(f"input rows {x.shape[0]} != first fan_in {mlp.layers[0].spec.fan_in}")
    trace = ForwardTrace(features=[x])
    a = x
    last = mlp.depth - 1
    for i, layer in enumerate(mlp.layers):
        trace.layer_inputs.append(a)
        with np.errstate(over="ignore", invalid="ignore"):
            h = layer.w @ a
        if not np.all(np.isfinite(h)):
            raise DivergenceError(f"non-finite features at layer {i + 1}")
        trace.features.append(h)
        a = _act(mlp.activation, h) if i < last else h
    return trace


def loss(trace: ForwardTrace, targets, kind: LossKind) -> float:
    out = trace.output
    batch = out.shape[1]
    if kind == LossKind.MSE:
        y = as_matrix(targets, "targets")
        if y.shape != out.shape:
            raise ValueError(f"target shape {y.shape} != output shape {out.shape}")
        d = out - y
        return float(0.5 * np.sum(d * d) / batch)
    y = np.asarray(targets)
    if y.ndim != 1 or y.shape[0] != batch:
        raise ValueError(f"class targets must be one index per column, got shape {y.shape}")
    if np.any(y < 0) or np.any(y >= out.shape[0]):
        raise ValueError("class index out of range")
    shifted = out - np.max(out, axis=0, keepdims=True)
    logz = np.log(np.sum(np.exp(shifted), axis=0))
    picked = shifted[y, np.arange(batch)]
    return float(np.mean(logz - picked))


@dataclass
class Grads:
    """weight_grads[l] is dL/dW for layer l+1 (effective weight); feature_grads[l] is dL/dh_{l+1}."""

    weight_grads: list[np.ndarray]
    feature_grads: list[np.ndarray]


def _output_grad(out: np.ndarray, targets, kind: LossKind) -> np.ndarray:
    batch = out.shape[1]
    if kind == LossKind.MSE:
        y = as_matrix(targets, "targets")
        if y.shape != out.shape:
            raise ValueError(f"target shape {y.shape} != output shape {out.shape}")
        return (out - y) / batch
    y = np.asarray(targets)
    shifted = out - np.max(out, axis=0, keepdims=True)
    e = np.exp(shifted)
    p = e / np.sum(e, axis=0, keepdims=True)
    p[y, np.arange(batch)] -= 1.0
    return p / batch


def backward(mlp: Mlp, trace: ForwardTrace, targets, kind: LossKind) -> Grads:
    """Exact gradients of the batch-mean loss with respect to every effective weight."""
    if len(trace.features) != mlp.depth + 1 or len(trace.layer_inputs) != mlp.depth:
        raise ValueError("trace does not match model depth")
    for layer, a in zip(mlp.layers, trace.layer_inputs):
        if a.shape[0] != layer.spec.fan_in:
            raise ValueError("trace is stale: layer input shape drifted")
    dh = _output_grad(trace.output, targets, kind)
    weight_grads: list[np.ndarray] = [None] * mlp.depth
    feature_grads: list[np.ndarray] = [None] * mlp.depth
    for i in range(mlp.depth - 1, -1, -1):
        feature_grads[i] = dh
        weight_grads[i] = dh @ trace.layer_inputs[i].T
        if i > 0:
            da = mlp.layers[i].w.T @ dh
            dh = _act_grad(mlp.activation, trace.features[i]) * da
    return Grads(weight_grads=weight_grads, feature_grads=feature_grads)
