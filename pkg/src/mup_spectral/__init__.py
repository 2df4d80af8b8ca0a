"""Width-robust optimizer scaling rules for MLPs, plus the instruments to verify them."""

from . import diagnostics, linalg, model, optim, scaling
from .model import Activation, LayerRole, LayerSpec, LossKind, Mlp, build, mlp_specs
from .optim import HyperParams, OptState, Trainer
from .scaling import OptimizerKind, ScalingRule, Scheme, derive_rule, effective_dims

__version__ = "0.1.0"

__all__ = [
    "diagnostics", "linalg", "model", "optim", "scaling",
    "Activation", "LayerRole", "LayerSpec", "LossKind", "Mlp", "build", "mlp_specs",
    "HyperParams", "OptState", "Trainer",
    "OptimizerKind", "ScalingRule", "Scheme", "derive_rule", "effective_dims",
    "__version__",
]
