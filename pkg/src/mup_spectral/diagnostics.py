"""Verification instruments: coordinate checks, spectral probes, gradient-rank probes.

The coordinate check is the workhorse: train briefly at several widths and
watch per-layer feature magnitudes relative to their value at the first step.
Flat-in-width curves certify the scaling rules; growth certifies a blow-up.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import frobenius_norm, numerical_rank, spectral_norm_power
from .model import Activation, DivergenceError, ForwardTrace, Grads, LossKind, Mlp, build, forward, mlp_specs
from .optim import HyperParams, Trainer, UpdateError
from .scaling import OptimizerKind, ScalingRule, Scheme, effective_dims, rules_for

PROBE_BATCH = 8


@dataclass
class CoordCheckRecord:
    width: int
    step: int
    layer: int
    rms_coord: float
    rel_to_first: float
    flagged: bool = False


@dataclass
class SpectralProbe:
    layer: int
    width: int
    spec_w: float
    spec_dw: float
    target: float
    ratio_w: float
    ratio_dw: float
    converged: bool = True


@dataclass
class RankProbe:
    layer: int
    rank: int
    frob_spec_ratio: float


def _rms_coords(trace: ForwardTrace) -> list[float]:
    """Per-layer RMS coordinate size ||h_l||_2 / sqrt(n_l), averaged over the batch."""
    out = []
    for h in trace.features[1:]:
        n_l = h.shape[0]
        out.append(float(np.mean(np.linalg.norm(h, axis=0)) / np.sqrt(n_l)))
    return out


def coordinate_check(
    widths: list[int],
    depth: int,
    kind: OptimizerKind,
    scheme: Scheme,
    steps: int,
    seed: int,
    task,
    hp: HyperParams | None = None,
    activation: Activation = Activation.TANH,
    loss_kind: LossKind = LossKind.MSE,
    batch_size: int = 16,
) -> list[CoordCheckRecord]:
    """Train each width for `steps` steps and record per-layer feature scales.

    The record at step t reflects t-1 optimizer updates, so rel_to_first is 1
    at step 1 by construction. The probe batch is a fixed slice of the
    validation set, identical for every width. Divergence flags the remaining
    records of that width and the sweep moves on.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    if sorted(widths) != list(widths):
        raise ValueError("widths must be ascending")
    hp = hp if hp is not None else HyperParams()
    probe_x = task.val_x[:, :PROBE_BATCH]
    records: list[CoordCheckRecord] = []
    n_train = task.train_x.shape[1]
    for width in widths:
        specs = mlp_specs(task.input_dim, width, task.output_dim, depth)
        mlp = build(specs, scheme, kind, seed, activation)
        trainer = Trainer(mlp, kind, hp, rules_for(kind, specs, scheme), loss_kind, probe_seed=seed)
        first: dict[int, float] = {}
        dead = False
        for t in range(1, steps + 1):
            rms = None
            if not dead:
                try:
                    rms = _rms_coords(forward(mlp, probe_x))
                except DivergenceError:
                    dead = True
            if dead:
                # Keep the step column complete: flagged rows for the rest of the run.
                for layer in range(1, depth + 1):
                    records.append(CoordCheckRecord(width, t, layer, float("nan"), float("nan"), True))
                continue
            for layer, value in enumerate(rms, start=1):
                if t == 1:
                    first[layer] = value
                base = first[layer]
                rel = value / base if base > 0 else float("nan")
                records.append(CoordCheckRecord(width, t, layer, value, rel, not np.isfinite(rel)))
            lo = ((t - 1) * batch_size) % n_train
            idx = np.arange(lo, lo + batch_size) % n_train
            xb = task.train_x[:, idx]
            yb = task.train_y[:, idx] if task.train_y.ndim == 2 else task.train_y[idx]
            try:
                trainer.train_step(xb, yb)
            except (DivergenceError, UpdateError):
                dead = True
    return records


def spectral_probe(mlp_before: Mlp, mlp_after: Mlp, rules: list[ScalingRule]) -> list[SpectralProbe]:
    """Per-layer ||W||_* and ||dW||_* against the sqrt(n_out_eff/n_in_eff) target."""
    if mlp_before.depth != mlp_after.depth or len(rules) != mlp_before.depth:
        raise ValueError("before/after models and rules must have matching depth")
    probes = []
    for i, (before, after) in enumerate(zip(mlp_before.layers, mlp_after.layers)):
        if before.w.shape != after.w.shape:
            raise ValueError(f"layer {i + 1} changed shape between snapshots")
        n_out, n_in = effective_dims(before.spec)
        target = float(np.sqrt(n_out / n_in))
        w_res = spectral_norm_power(before.w)
        dw = after.w - before.w
        if np.any(dw):
            dw_res = spectral_norm_power(dw)
            dw_spec, dw_ok = dw_res.value, dw_res.converged
        else:
            dw_spec, dw_ok = 0.0, True
        probes.append(SpectralProbe(
            layer=i + 1,
            width=before.spec.fan_out,
            spec_w=w_res.value,
            spec_dw=dw_spec,
            target=target,
            ratio_w=w_res.value / target,
            ratio_dw=dw_spec / target,
            converged=w_res.converged and dw_ok,
        ))
    return probes


def rank_probe(grads: Grads, batch_size: int) -> list[RankProbe]:
    """Numerical rank and Frobenius/spectral ratio of every layer gradient."""
    probes = []
    for i, g in enumerate(grads.weight_grads):
        fro = frobenius_norm(g)
        if fro == 0.0:
            probes.append(RankProbe(layer=i + 1, rank=0, frob_spec_ratio=1.0))
            continue
        spec = spectral_norm_power(g).value
        probes.append(RankProbe(layer=i + 1, rank=numerical_rank(g), frob_spec_ratio=fro / spec))
    return probes


def feature_grad_probe(mlp: Mlp, trace: ForwardTrace, grads: Grads) -> list[float]:
    """Per-layer ||dL/dh_l||_2 * sqrt(n_l) for a single-sample batch."""
    if trace.batch_size != 1:
        raise ValueError("feature gradient probe requires batch size 1")
    out = []
    for fg in grads.feature_grads:
        n_l = fg.shape[0]
        out.append(float(np.linalg.norm(fg[:, 0]) * np.sqrt(n_l)))
    return out
