"""Per-layer width scaling rules for the supported optimizers.

Every rule is a set of multiplicative factors (init std, weight multiplier,
learning rate, epsilon, weight decay) keyed by optimizer kind, layer role and
layer dimensions. All order constants are fixed to 1 and the base width is 1.
"""

import enum
import math
from dataclasses import dataclass

from .model import LayerRole, LayerSpec


class Scheme(str, enum.Enum):
    SP = "sp"
    MUP = "mup"


class OptimizerKind(str, enum.Enum):
    ADAMW = "adamw"
    ADOPT = "adopt"
    LAMB = "lamb"
    SOPHIA = "sophia"
    SHAMPOO = "shampoo"
    MUON = "muon"


@dataclass(frozen=True)
class ScalingRule:
    init_std: float
    weight_mult: float
    lr_mult: float
    eps_mult: float
    wd_mult: float

    def __post_init__(self):
        for name in ("init_std", "weight_mult", "lr_mult", "eps_mult", "wd_mult"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and positive, got {v}")


def effective_dims(layer: LayerSpec) -> tuple[int, int]:
    """(n_out_eff, n_in_eff): width-independent dimensions are replaced by 1."""
    n_out = layer.fan_out if layer.width_scaled_out else 1
    n_in = layer.fan_in if layer.width_scaled_in else 1
    return n_out, n_in


def derive_rule(kind: OptimizerKind, layer: LayerSpec, scheme: Scheme) -> ScalingRule:
    """Scaling rule for one layer.

    Under SP only the init std depends on the layer (fan-in init, unit
    multipliers). Under the width-robust scheme the weight multiplier is
    (1/sqrt(n_in_eff)) * min(1, sqrt(n_out_eff / n_in_eff)) and the learning
    rate multiplier depends on the optimizer family; epsilon shrinks by
    1/n_out_eff and weight decay grows by n_in_eff so both terms keep the same
    order as the gradient term at every width.

    Muon is defined for hidden layers only; on input/output layers this
    returns the AdamW rule, matching the step-time fallback.
    """
    kind = OptimizerKind(kind)
    scheme = Scheme(scheme)
    if scheme == Scheme.SP:
        return ScalingRule(
            init_std=1.0 / math.sqrt(layer.fan_in),
            weight_mult=1.0,
            lr_mult=1.0,
            eps_mult=1.0,
            wd_mult=1.0,
        )
    if kind == OptimizerKind.MUON and layer.role != LayerRole.HIDDEN:
        return derive_rule(OptimizerKind.ADAMW, layer, scheme)
    n_out, n_in = effective_dims(layer)
    weight_mult = (1.0 / math.sqrt(n_in)) * min(1.0, math.sqrt(n_out / n_in))
    if kind in (OptimizerKind.ADAMW, OptimizerKind.ADOPT, OptimizerKind.SOPHIA):
        lr_mult = 1.0 / n_in
    elif kind in (OptimizerKind.LAMB, OptimizerKind.MUON):
        lr_mult = 1.0
    else:  # Shampoo
        lr_mult = math.sqrt(n_out / n_in)
    return ScalingRule(
        init_std=1.0,
        weight_mult=weight_mult,
        lr_mult=lr_mult,
        eps_mult=1.0 / n_out,
        wd_mult=float(n_in),
    )


def rules_for(kind: OptimizerKind, specs: list[LayerSpec], scheme: Scheme) -> list[ScalingRule]:
    return [derive_rule(kind, s, scheme) for s in specs]


def rule_table(
    kind: OptimizerKind,
    widths: list[int],
    depth: int,
    scheme: Scheme = Scheme.MUP,
    input_dim: int = 16,
    output_dim: int = 16,
) -> str:
    """Tab-separated dump of the derived rules, one row per layer per width."""
    from .model import mlp_specs

    if not widths:
        raise ValueError("widths must be nonempty")
    cols = ["width", "layer", "role", "fan_out", "fan_in", "init_std",
            "weight_mult", "lr_mult", "eps_mult", "wd_mult"]
    lines = ["\t".join(cols)]
    for width in widths:
        for i, spec in enumerate(mlp_specs(input_dim, width, output_dim, depth), start=1):
            rule = derive_rule(kind, spec, scheme)
            lines.append("\t".join([
                str(width), str(i), spec.role.value, str(spec.fan_out), str(spec.fan_in),
                repr(rule.init_std), repr(rule.weight_mult), repr(rule.lr_mult),
                repr(rule.eps_mult), repr(rule.wd_mult),
            ]))
    return "\n".join(lines) + "\n"
