import numpy as np
import pytest

from mup_spectral.linalg import frobenius_norm, spectral_norm
from mup_spectral.model import (
    Activation,
    DivergenceError,
    Layer,
    LayerRole,
    LayerSpec,
    LossKind,
    Mlp,
    backward,
    build,
    forward,
    loss,
    mlp_specs,
)
from mup_spectral.scaling import OptimizerKind, Scheme
from oracles import fd_weight_grads, max_rel_err


def identity_mlp(dims):
    layers = []
    for fan_in, fan_out in zip(dims, dims[1:]):
        spec = LayerSpec(fan_in, fan_out, LayerRole.HIDDEN, True, True)
        layers.append(Layer(spec, np.eye(fan_out, fan_in), 1.0))
    return Mlp(layers, Activation.IDENTITY)


def test_layer_spec_role_conventions():
    with pytest.raises(ValueError):
        LayerSpec(4, 8, LayerRole.INPUT, True, True)
    with pytest.raises(ValueError):
        LayerSpec(8, 4, LayerRole.OUTPUT, True, True)
    with pytest.raises(ValueError):
        LayerSpec(0, 4, LayerRole.HIDDEN, True, True)


def test_mlp_specs_chain():
    specs = mlp_specs(10, 32, 3, 4)
    assert [s.role for s in specs] == [LayerRole.INPUT, LayerRole.HIDDEN, LayerRole.HIDDEN, LayerRole.OUTPUT]
    for a, b in zip(specs, specs[1:]):
        assert a.fan_out == b.fan_in


def test_build_mup_hidden_multiplier():
    specs = mlp_specs(10, 256, 3, 3)
    mlp = build(specs, Scheme.MUP, OptimizerKind.ADAMW, seed=0)
    assert mlp.layers[1].multiplier == pytest.approx(1.0 / 16.0, abs=0)


def test_build_mup_input_multiplier_is_one():
    specs = mlp_specs(10, 256, 3, 3)
    mlp = build(specs, Scheme.MUP, OptimizerKind.ADAMW, seed=0)
    assert mlp.layers[0].multiplier == 1.0


def test_build_deterministic():
    specs = mlp_specs(6, 32, 4, 3)
    a = build(specs, Scheme.MUP, OptimizerKind.LAMB, seed=99)
    b = build(specs, Scheme.MUP, OptimizerKind.LAMB, seed=99)
    for la, lb in zip(a.layers, b.layers):
        assert np.array_equal(la.w, lb.w)


def test_build_same_draw_across_schemes():
    # the underlying standard-normal sample is shared; only rule factors differ
    specs = mlp_specs(6, 32, 4, 3)
    mup = build(specs, Scheme.MUP, OptimizerKind.ADAMW, seed=5)
    sp = build(specs, Scheme.SP, OptimizerKind.ADAMW, seed=5)
    for lm, ls in zip(mup.layers, sp.layers):
        scale = lm.multiplier / (1.0 / np.sqrt(ls.spec.fan_in))
        assert np.allclose(lm.w, ls.w * scale, rtol=1e-12)


def test_build_rejects_inconsistent_chain():
    specs = [
        LayerSpec(4, 8, LayerRole.INPUT, False, True),
        LayerSpec(9, 3, LayerRole.OUTPUT, True, False),
    ]
    with pytest.raises(ValueError, match="mismatch"):
        build(specs, Scheme.MUP, OptimizerKind.ADAMW, seed=0)


def test_forward_identity_network():
    mlp = identity_mlp([4, 4, 4])
    x = np.random.default_rng(0).standard_normal((4, 7))
    trace = forward(mlp, x)
    assert np.allclose(trace.output, x)
    assert len(trace.features) == 3


def test_forward_single_linear_layer():
    spec = LayerSpec(3, 2, LayerRole.HIDDEN, True, True)
    w = np.arange(6.0).reshape(2, 3)
    mlp = Mlp([Layer(spec, 0.5 * w, 0.5)])
    x = np.ones((3, 1))
    trace = forward(mlp, x)
    assert np.allclose(trace.output, 0.5 * w @ x)


def test_forward_relu_zeroes_downstream():
    mlp = identity_mlp([3, 3, 3])
    mlp.activation = Activation.RELU
    x = -np.ones((3, 2))
    trace = forward(mlp, x)
    assert np.all(trace.output == 0.0)


def test_forward_rejects_dimension_mismatch():
    mlp = identity_mlp([4, 4])
    with pytest.raises(ValueError):
        forward(mlp, np.ones((5, 2)))


def test_forward_raises_on_divergence():
    spec = LayerSpec(2, 2, LayerRole.HIDDEN, True, True)
    mlp = Mlp([Layer(spec, np.full((2, 2), 1e308), 1.0)])
    with pytest.raises(DivergenceError):
        forward(mlp, np.full((2, 1), 1e10))


def test_mse_perfect_fit_is_zero():
    mlp = identity_mlp([3, 3])
    x = np.random.default_rng(1).standard_normal((3, 4))
    trace = forward(mlp, x)
    assert loss(trace, x, LossKind.MSE) == 0.0


def test_mse_half_convention():
    mlp = identity_mlp([2, 2])
    trace = forward(mlp, np.array([[1.0], [0.0]]))
    assert loss(trace, np.zeros((2, 1)), LossKind.MSE) == pytest.approx(0.5, abs=1e-15)


def test_softmax_ce_uniform_logits():
    mlp = identity_mlp([5, 5])
    trace = forward(mlp, np.zeros((5, 3)))
    got = loss(trace, np.array([0, 2, 4]), LossKind.SOFTMAX_CE)
    assert got == pytest.approx(np.log(5), abs=1e-12)


def test_loss_shape_mismatch_rejected():
    mlp = identity_mlp([3, 3])
    trace = forward(mlp, np.ones((3, 2)))
    with pytest.raises(ValueError):
        loss(trace, np.ones((2, 2)), LossKind.MSE)
    with pytest.raises(ValueError):
        loss(trace, np.array([0, 1, 2]), LossKind.SOFTMAX_CE)
    with pytest.raises(ValueError):
        loss(trace, np.array([0, 5]), LossKind.SOFTMAX_CE)


@pytest.mark.parametrize("activation", list(Activation))
@pytest.mark.parametrize("kind", list(LossKind))
def test_backward_matches_finite_differences(activation, kind):
    rng = np.random.default_rng(hash((activation, kind)) % 2**32)
    specs = mlp_specs(5, 9, 4, 3)
    mlp = build(specs, Scheme.SP, OptimizerKind.ADAMW, seed=17, activation=activation)
    x = rng.standard_normal((5, 6))
    if kind == LossKind.MSE:
        y = rng.standard_normal((4, 6))
    else:
        y = rng.integers(0, 4, size=6)
    trace = forward(mlp, x)
    grads = backward(mlp, trace, y, kind)
    fd = fd_weight_grads(mlp, x, y, kind)
    for g, f in zip(grads.weight_grads, fd):
        assert max_rel_err(g, f) <= 1e-4


def test_backward_rank_one_at_batch_one():
    specs = mlp_specs(6, 12, 3, 4)
    mlp = build(specs, Scheme.MUP, OptimizerKind.ADAMW, seed=2, activation=Activation.IDENTITY)
    rng = np.random.default_rng(8)
    x = rng.standard_normal((6, 1))
    y = rng.standard_normal((3, 1))
    grads = backward(mlp, forward(mlp, x), y, LossKind.MSE)
    for g in grads.weight_grads:
        ratio = frobenius_norm(g) / spectral_norm(g)
        assert 1.0 <= ratio <= 1.0 + 1e-6


def test_backward_zero_at_exact_fit():
    mlp = identity_mlp([3, 3])
    x = np.random.default_rng(4).standard_normal((3, 5))
    grads = backward(mlp, forward(mlp, x), x, LossKind.MSE)
    assert all(np.all(g == 0.0) for g in grads.weight_grads)


def test_backward_rejects_stale_trace():
    mlp = identity_mlp([3, 3, 3])
    other = identity_mlp([3, 3])
    trace = forward(other, np.ones((3, 1)))
    with pytest.raises(ValueError):
        backward(mlp, trace, np.ones((3, 1)), LossKind.MSE)


def test_feature_scale_band_at_init():
    # hidden-feature RMS coordinate size stays in a narrow width-independent band
    rng = np.random.default_rng(0)
    x16 = rng.standard_normal((16, 8))
    values = {layer: [] for layer in (1, 2)}
    for width in (64, 128, 256, 512, 1024):
        specs = mlp_specs(16, width, 8, 3)
        mlp = build(specs, Scheme.MUP, OptimizerKind.ADAMW, seed=3, activation=Activation.IDENTITY)
        trace = forward(mlp, x16)
        for layer in (1, 2):
            h = trace.features[layer]
            values[layer].append(float(np.mean(np.linalg.norm(h, axis=0)) / np.sqrt(h.shape[0])))
    for layer, vals in values.items():
        assert max(vals) / min(vals) <= 4.0


def test_feature_gradient_scale_band():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((16, 1))
    y = rng.standard_normal((8, 1))
    per_layer = {}
    for width in (64, 128, 256, 512, 1024):
        specs = mlp_specs(16, width, 8, 3)
        mlp = build(specs, Scheme.MUP, OptimizerKind.ADAMW, seed=3, activation=Activation.IDENTITY)
        grads = backward(mlp, forward(mlp, x), y, LossKind.MSE)
        for i, fg in enumerate(grads.feature_grads):
            per_layer.setdefault(i, []).append(float(np.linalg.norm(fg) * np.sqrt(fg.shape[0])))
    for vals in per_layer.values():
        assert max(vals) / min(vals) <= 8.0


def test_copy_is_independent():
    mlp = identity_mlp([3, 3])
    clone = mlp.copy()
    clone.layers[0].w[0, 0] = 99.0
    assert mlp.layers[0].w[0, 0] == 1.0
