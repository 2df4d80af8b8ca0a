"""Per-layer optimizer steps with width-aware multipliers.

Each step function consumes the gradients of one batch, mutates the model
weights and its own accumulators, and (optionally) reports the spectral size
of the raw update direction and of the applied weight change. A step needs
exclusive access to its (model, state) pair; distinct pairs are independent.
"""

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .linalg import (
    frobenius_norm,
    matrix_fractional_power,
    newton_schulz_orthogonalize,
    numerical_rank,
    spectral_norm_power,
)
from .model import DivergenceError, Grads, LayerRole, LossKind, Mlp, backward, forward, loss
from .scaling import OptimizerKind, ScalingRule, effective_dims


@dataclass
class HyperParams:
    eta: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-8
    weight_decay: float = 0.0
    gamma: float = 0.05          # Sophia clip scale
    delta: float = 0.0           # Shampoo preconditioner ridge
    mu: float = 0.95             # Muon momentum
    ns_iters: int = 60
    hess_interval: int = 10

    def __post_init__(self):
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("beta1, beta2 must lie in [0, 1)")
        if not (0.0 <= self.mu < 1.0):
            raise ValueError("mu must lie in [0, 1)")
        if self.eps < 0 or self.weight_decay < 0 or self.delta < 0:
            raise ValueError("eps, weight_decay, delta must be nonnegative")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.ns_iters < 1 or self.hess_interval < 1:
            raise ValueError("ns_iters and hess_interval must be >= 1")


@dataclass
class LayerState:
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    h: np.ndarray | None = None
    left: np.ndarray | None = None    # Shampoo L, fan_out x fan_out
    right: np.ndarray | None = None   # Shampoo R, fan_in x fan_in
    momentum: np.ndarray | None = None  # Muon buffer
    # scratch buffers, lazily allocated; valid only within one step
    work1: np.ndarray | None = None
    work2: np.ndarray | None = None

    def scratch(self, like: np.ndarray):
        if self.work1 is None or self.work1.shape != like.shape:
            self.work1 = np.empty_like(like)
            self.work2 = np.empty_like(like)
        return self.work1, self.work2


@dataclass
class OptState:
    layers: list[LayerState]
    t: int = 0

    @classmethod
    def init(cls, mlp: Mlp, kind: OptimizerKind, hp: HyperParams) -> "OptState":
        kind = OptimizerKind(kind)
        states = []
        for layer in mlp.layers:
            shape = layer.w.shape
            st = LayerState()
            if kind in (OptimizerKind.ADAMW, OptimizerKind.ADOPT, OptimizerKind.LAMB):
                st.m = np.zeros(shape)
                st.v = np.zeros(shape)
            elif kind == OptimizerKind.SOPHIA:
                st.m = np.zeros(shape)
                st.h = np.zeros(shape)
            elif kind == OptimizerKind.SHAMPOO:
                st.left = hp.delta * np.eye(shape[0])
                st.right = hp.delta * np.eye(shape[1])
            else:  # Muon: AdamW accumulators for the non-hidden fallback layers
                if layer.spec.role == LayerRole.HIDDEN:
                    st.momentum = np.zeros(shape)
                else:
                    st.m = np.zeros(shape)
                    st.v = np.zeros(shape)
            states.append(st)
        return cls(layers=states)


class UpdateError(RuntimeError):
    """Raised when a step would apply non-finite updates; the model is left unchanged."""


@dataclass
class LayerReport:
    layer: int
    psi_spec: float
    dw_spec: float
    effective_lr: float
    update_rank: int
    note: str = ""


@dataclass
class StepReport:
    t: int
    layers: list[LayerReport] = field(default_factory=list)


def _check_inputs(mlp: Mlp, grads: Grads, state: OptState, rules: list[ScalingRule]) -> None:
    if len(grads.weight_grads) != mlp.depth or len(rules) != mlp.depth or len(state.layers) != mlp.depth:
        raise ValueError("grads, state and rules must cover every layer")
    for layer, g in zip(mlp.layers, grads.weight_grads):
        if g.shape != layer.w.shape:
            raise ValueError("gradient shape does not match layer weight")


def _guarded_div(num: np.ndarray, denom: np.ndarray) -> np.ndarray:
    # 0/0 -> 0 (the signSGD limit); x/0 with x != 0 -> inf, caught by the finite check.
    out = np.empty_like(num)
    zero = denom == 0.0
    np.divide(num, denom, out=out, where=~zero)
    out[zero & (num == 0.0)] = 0.0
    out[zero & (num != 0.0)] = np.inf
    return out


def _layer_report(i, psi, delta, eff_lr, note=""):
    psi_res = spectral_norm_power(psi) if np.any(psi) else None
    dw_res = spectral_norm_power(delta) if np.any(delta) else None
    if (psi_res is not None and not psi_res.converged) or (dw_res is not None and not dw_res.converged):
        note = (note + " norm-not-converged").strip()
    return LayerReport(
        layer=i + 1,
        psi_spec=psi_res.value if psi_res else 0.0,
        dw_spec=dw_res.value if dw_res else 0.0,
        effective_lr=eff_lr,
        update_rank=numerical_rank(delta) if np.any(delta) else 0,
        note=note,
    )


def _adam_ratio(layer, g, st, hp, rule, t_new):
    """Update m, v in place and return the bias-corrected m_hat / (sqrt(v_hat) + eps) ratio.

    With a positive additive eps the denominator cannot vanish and the math
    runs through preallocated scratch (the returned array is scratch: copy it
    if it must outlive the step). With eps == 0 the allocation-based guarded
    path is used; its operation order makes the beta = eps = 0 step an exact
    elementwise sign(g).
    """
    eps_term = hp.eps * rule.eps_mult
    bc1 = 1.0 - hp.beta1 ** t_new
    bc2 = 1.0 - hp.beta2 ** t_new
    if eps_term > 0.0:
        w1, w2 = st.scratch(g)
        np.multiply(st.m, hp.beta1, out=st.m)
        np.multiply(g, 1.0 - hp.beta1, out=w1)
        st.m += w1
        np.multiply(st.v, hp.beta2, out=st.v)
        np.multiply(g, g, out=w2)
        w2 *= 1.0 - hp.beta2
        st.v += w2
        np.divide(st.v, bc2, out=w2)
        np.sqrt(w2, out=w2)
        w2 += eps_term
        np.divide(st.m, bc1, out=w1)
        w1 /= w2
        return w1
    m_new = hp.beta1 * st.m + (1.0 - hp.beta1) * g
    v_new = hp.beta2 * st.v + (1.0 - hp.beta2) * (g * g)
    st.m, st.v = m_new, v_new
    m_hat = m_new / bc1
    v_hat = v_new / bc2
    denom = np.sqrt(v_hat) + eps_term
    return _guarded_div(m_hat, denom)


def _adamw_layer(layer, g, st, hp, rule, t_new):
    ratio = _adam_ratio(layer, g, st, hp, rule, t_new)
    if hp.weight_decay != 0.0:
        psi = ratio + (hp.weight_decay * rule.wd_mult) * layer.w
    else:
        psi = ratio
    delta = psi * (-(hp.eta * rule.lr_mult))
    return delta, psi


@np.errstate(divide="ignore", invalid="ignore", over="ignore")
def step_adamw(mlp, grads, state, hp, rules, compute_report=True):
    """Decoupled-decay Adam with bias correction and width-scaled lr / eps / decay."""
    _check_inputs(mlp, grads, state, rules)
    t_new = state.t + 1
    pending = []
    for layer, g, st, rule in zip(mlp.layers, grads.weight_grads, state.layers, rules):
        delta, psi = _adamw_layer(layer, g, st, hp, rule, t_new)
        pending.append((delta, psi, None, "", hp.eta * rule.lr_mult))
    return _finish(mlp, state, t_new, pending, compute_report)


@np.errstate(divide="ignore", invalid="ignore", over="ignore")
def step_adopt(mlp, grads, state, hp, rules, compute_report=True):
    """Adam variant that normalizes the current gradient by the previous second moment.

    The first call only seeds v with g*g and leaves the weights untouched;
    afterwards m is built from g / max(sqrt(v_prev), eps) and v is updated
    after the weight step.
    """
    _check_inputs(mlp, grads, state, rules)
    t_new = state.t + 1
    pending = []
    if state.t == 0:
        for g in grads.weight_grads:
            pending.append((None, None, {"v": g * g}, "init", 0.0))
        return _finish(mlp, state, t_new, pending, compute_report)
    for layer, g, st, rule in zip(mlp.layers, grads.weight_grads, state.layers, rules):
        eps_term = hp.eps * rule.eps_mult
        if eps_term > 0.0:
            w1, w2 = st.scratch(g)
            np.sqrt(st.v, out=w2)
            np.maximum(w2, eps_term, out=w2)
            np.divide(g, w2, out=w1)
            w1 *= 1.0 - hp.beta1
            np.multiply(st.m, hp.beta1, out=st.m)
            st.m += w1
        else:
            denom = np.maximum(np.sqrt(st.v), eps_term)
            st.m = hp.beta1 * st.m + (1.0 - hp.beta1) * _guarded_div(g, denom)
        if hp.weight_decay != 0.0:
            psi = st.m + (hp.weight_decay * rule.wd_mult) * layer.w
        else:
            psi = st.m
        delta = psi * (-(hp.eta * rule.lr_mult))
        # v is refreshed only after the update uses the previous one
        np.multiply(st.v, hp.beta2, out=st.v)
        st.v += (1.0 - hp.beta2) * (g * g)
        pending.append((delta, psi, None, "", hp.eta * rule.lr_mult))
    return _finish(mlp, state, t_new, pending, compute_report)


@np.errstate(divide="ignore", invalid="ignore", over="ignore")
def step_lamb(mlp, grads, state, hp, rules, compute_report=True):
    """Layerwise trust-ratio step: the Adam direction rescaled by ||W||_F / ||update||_F."""
    _check_inputs(mlp, grads, state, rules)
    t_new = state.t + 1
    pending = []
    for layer, g, st, rule in zip(mlp.layers, grads.weight_grads, state.layers, rules):
        r = _adam_ratio(layer, g, st, hp, rule, t_new)
        if hp.weight_decay != 0.0:
            u = r + (hp.weight_decay * rule.wd_mult) * layer.w
        else:
            u = r
        if not np.all(np.isfinite(u)):
            raise UpdateError("non-finite trust-ratio numerator; model unchanged")
        u_norm = frobenius_norm(u)
        if u_norm < 1e-12:
            pending.append((None, None, None, "skipped-degenerate-trust-ratio", 0.0))
            continue
        trust = frobenius_norm(layer.w) / u_norm
        psi = trust * u
        delta = psi * (-(hp.eta * rule.lr_mult))
        pending.append((delta, psi, None, "", hp.eta * rule.lr_mult))
    return _finish(mlp, state, t_new, pending, compute_report)


@np.errstate(divide="ignore", invalid="ignore", over="ignore")
def step_sophia(mlp, grads, state, hp, rules, compute_report=True):
    """Clipped diagonal-curvature step; falls back to sign-like updates where h <= 0.

    Expects state.h to be refreshed (see refresh_hessian) at least once per
    hess_interval steps before being called.
    """
    _check_inputs(mlp, grads, state, rules)
    t_new = state.t + 1
    pending = []
    for layer, g, st, rule in zip(mlp.layers, grads.weight_grads, state.layers, rules):
        eps_term = hp.eps * rule.eps_mult
        if eps_term > 0.0:
            w1, w2 = st.scratch(g)
            np.multiply(st.m, hp.beta1, out=st.m)
            np.multiply(g, 1.0 - hp.beta1, out=w1)
            st.m += w1
            np.multiply(st.h, hp.gamma, out=w2)
            np.maximum(w2, eps_term, out=w2)
            np.divide(st.m, w2, out=w1)
            clipped = np.clip(w1, -1.0, 1.0, out=w1)
        else:
            st.m = hp.beta1 * st.m + (1.0 - hp.beta1) * g
            denom = np.maximum(hp.gamma * st.h, eps_term)
            clipped = np.clip(_guarded_div(st.m, denom), -1.0, 1.0)
        if hp.weight_decay != 0.0:
            psi = clipped + (hp.weight_decay * rule.wd_mult) * layer.w
        else:
            psi = clipped
        delta = psi * (-(hp.eta * rule.lr_mult))
        pending.append((delta, psi, None, "", hp.eta * rule.lr_mult))
    return _finish(mlp, state, t_new, pending, compute_report)


@np.errstate(divide="ignore", invalid="ignore", over="ignore")
def step_shampoo(mlp, grads, state, hp, rules, compute_report=True):
    """Two-sided preconditioned step with inverse fourth roots of the Gram accumulators.

    Roots are recomputed from scratch every step; rank-deficient directions
    contribute nothing (pseudo-power convention).
    """
    _check_inputs(mlp, grads, state, rules)
    t_new = state.t + 1
    pending = []
    for layer, g, st, rule in zip(mlp.layers, grads.weight_grads, state.layers, rules):
        gl = g @ g.T
        gr = g.T @ g
        left = st.left + 0.5 * (gl + gl.T)
        right = st.right + 0.5 * (gr + gr.T)
        acc = {"left": left, "right": right}
        try:
            left_root = matrix_fractional_power(left, -0.25)
            right_root = matrix_fractional_power(right, -0.25)
        except (ValueError, np.linalg.LinAlgError) as exc:
            pending.append((None, None, acc, f"skipped-eig-failure: {exc}", 0.0))
            continue
        psi = left_root @ g @ right_root
        delta = -(hp.eta * rule.lr_mult) * psi
        pending.append((delta, psi, acc, "", hp.eta * rule.lr_mult))
    return _finish(mlp, state, t_new, pending, compute_report)


@np.errstate(divide="ignore", invalid="ignore", over="ignore")
def step_muon(mlp, grads, state, hp, rules, compute_report=True):
    """Orthogonalized momentum for hidden layers, scaled by sqrt(fan_out/fan_in).

    Input and output layers are stepped with AdamW instead (the rules list is
    expected to carry AdamW rules for them).
    """
    _check_inputs(mlp, grads, state, rules)
    t_new = state.t + 1
    pending = []
    for layer, g, st, rule in zip(mlp.layers, grads.weight_grads, state.layers, rules):
        if layer.spec.role != LayerRole.HIDDEN:
            delta, psi = _adamw_layer(layer, g, st, hp, rule, t_new)
            pending.append((delta, psi, None, "adamw-fallback", hp.eta * rule.lr_mult))
            continue
        buf = hp.mu * st.momentum + g
        acc = {"momentum": buf}
        if not np.any(buf):
            pending.append((None, None, acc, "skipped-zero-momentum", 0.0))
            continue
        ns = newton_schulz_orthogonalize(buf, iters=hp.ns_iters, tol=linalg.NS_TOL)
        n_out, n_in = effective_dims(layer.spec)
        psi = np.sqrt(n_out / n_in) * ns.matrix
        delta = -(hp.eta * rule.lr_mult) * psi
        note = "" if ns.converged else "ns-not-converged"
        pending.append((delta, psi, acc, note, hp.eta * rule.lr_mult))
    return _finish(mlp, state, t_new, pending, compute_report)


def _finish(mlp, state, t_new, pending, compute_report):
    for i, (delta, _psi, _acc, _note, _lr) in enumerate(pending):
        if delta is not None and not np.all(np.isfinite(delta)):
            raise UpdateError(f"non-finite update at layer {i + 1}; model unchanged")
    report = StepReport(t=t_new) if compute_report else None
    for i, (delta, psi, acc, note, eff_lr) in enumerate(pending):
        if acc:
            for name, value in acc.items():
                setattr(state.layers[i], name, value)
        if delta is not None:
            mlp.layers[i].w += delta
        if compute_report:
            z = np.zeros_like(mlp.layers[i].w)
            report.layers.append(_layer_report(
                i, psi if psi is not None else z, delta if delta is not None else z, eff_lr, note))
    state.t = t_new
    return report


STEP_FUNCS = {
    OptimizerKind.ADAMW: step_adamw,
    OptimizerKind.ADOPT: step_adopt,
    OptimizerKind.LAMB: step_lamb,
    OptimizerKind.SOPHIA: step_sophia,
    OptimizerKind.SHAMPOO: step_shampoo,
    OptimizerKind.MUON: step_muon,
}


def step(kind, mlp, grads, state, hp, rules, compute_report=True):
    return STEP_FUNCS[OptimizerKind(kind)](mlp, grads, state, hp, rules, compute_report)


def estimate_hessian_diag(mlp: Mlp, x, y, loss_kind: LossKind, rng: np.random.Generator,
                          probe_scale: float = 1e-4) -> list[np.ndarray]:
    """One Hutchinson probe of each layer's loss-Hessian diagonal.

    Per layer: draw a Rademacher direction z, form the Hessian-vector product
    by central finite differences of the gradient at W +- r z (perturbing only
    that layer), and return z * HVP. Unbiased in expectation; average many
    probes to reduce variance.
    """
    estimates = []
    for i, layer in enumerate(mlp.layers):
        saved = layer.w
        z = rng.integers(0, 2, size=saved.shape).astype(np.float64) * 2.0 - 1.0
        r = probe_scale * (1.0 + frobenius_norm(saved))
        for attempt in range(2):
            try:
                layer.w = saved + r * z
                g_plus = backward(mlp, forward(mlp, x), y, loss_kind).weight_grads[i]
                layer.w = saved - r * z
                g_minus = backward(mlp, forward(mlp, x), y, loss_kind).weight_grads[i]
            finally:
                layer.w = saved
            hvp = (g_plus - g_minus) / (2.0 * r)
            if np.all(np.isfinite(hvp)):
                break
            if attempt == 1:
                raise DivergenceError(f"non-finite Hessian probe at layer {i + 1}")
            r /= 10.0
        estimates.append(z * hvp)
    return estimates


def refresh_hessian(mlp, state, hp, x, y, loss_kind, rng) -> None:
    """EMA-update the Sophia curvature estimate from one Hutchinson probe."""
    raw = estimate_hessian_diag(mlp, x, y, loss_kind, rng)
    for st, h_raw in zip(state.layers, raw):
        st.h = hp.beta2 * st.h + (1.0 - hp.beta2) * h_raw


class Trainer:
    """Drives forward/backward/step for one (model, optimizer) pair.

    Handles the Sophia curvature refresh cadence; everything is deterministic
    given the seed used for the probe generator.
    """

    def __init__(self, mlp, kind, hp, rules, loss_kind, probe_seed=0):
        self.mlp = mlp
        self.kind = OptimizerKind(kind)
        self.hp = hp
        self.rules = rules
        self.loss_kind = LossKind(loss_kind)
        self.state = OptState.init(mlp, self.kind, hp)
        self._rng = np.random.default_rng(probe_seed)

    def train_step(self, x, y, compute_report=False):
        """One optimizer step on a batch; returns (batch loss, report or None)."""
        if self.kind == OptimizerKind.SOPHIA and self.state.t % self.hp.hess_interval == 0:
            refresh_hessian(self.mlp, self.state, self.hp, x, y, self.loss_kind, self._rng)
        trace = forward(self.mlp, x)
        value = loss(trace, y, self.loss_kind)
        if not np.isfinite(value):
            raise DivergenceError("non-finite training loss")
        grads = backward(self.mlp, trace, y, self.loss_kind)
        report = step(self.kind, self.mlp, grads, self.state, self.hp, self.rules, compute_report)
        return value, report
