"""Experiment configuration: a flat `key = value` text format plus validation.

Lines starting with `#` (or anything after a `#`) are comments; lists are
comma-separated. CLI flags override file keys of the same name.
"""

from dataclasses import dataclass, field, fields
from pathlib import Path

from ..model import Activation, LossKind
from ..optim import HyperParams
from ..scaling import OptimizerKind, Scheme


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    task: str = "teacher_student"            # teacher_student | char_lm
    optimizer: OptimizerKind = OptimizerKind.ADAMW
    scheme: Scheme = Scheme.MUP
    widths: list = field(default_factory=lambda: [64, 128, 256])
    depth: int = 3
    lr_grid: list = field(default_factory=lambda: [0.01])
    seeds: list = field(default_factory=lambda: [0, 1, 2])
    steps: int = 100
    batch_size: int = 16
    activation: Activation = Activation.TANH
    loss: LossKind = LossKind.MSE
    # task parameters
    input_dim: int = 16
    output_dim: int = 8
    teacher_width: int = 32
    n_train: int = 1024
    n_val: int = 256
    data_seed: int = 0
    corpus_path: str = ""
    context_len: int = 8
    val_fraction: float = 0.2
    # optimizer hyperparameters (eta is taken from lr_grid per sweep cell)
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-8
    weight_decay: float = 0.0
    gamma: float = 0.05
    delta: float = 0.0
    mu: float = 0.95
    ns_iters: int = 60
    hess_interval: int = 10

    def __post_init__(self):
        self.optimizer = OptimizerKind(self.optimizer)
        self.scheme = Scheme(self.scheme)
        self.activation = Activation(self.activation)
        self.loss = LossKind(self.loss)
        if self.task not in ("teacher_student", "char_lm"):
            raise ConfigError(f"unknown task {self.task!r}")
        if not self.widths or not self.lr_grid or not self.seeds:
            raise ConfigError("widths, lr_grid and seeds must be nonempty")
        if sorted(self.widths) != list(self.widths):
            raise ConfigError("widths must be ascending")
        if any(w < 1 for w in self.widths):
            raise ConfigError("widths must be positive")
        if any(lr < 0 for lr in self.lr_grid):
            raise ConfigError("lr_grid entries must be nonnegative")
        if self.depth < 2:
            raise ConfigError("depth must be >= 2")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1 (and is held fixed across widths)")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.task == "char_lm":
            if not self.corpus_path:
                raise ConfigError("char_lm task requires corpus_path")
            if self.loss != LossKind.SOFTMAX_CE:
                raise ConfigError("char_lm task requires loss = softmax_ce")

    def hyperparams(self, eta: float) -> HyperParams:
        return HyperParams(
            eta=eta, beta1=self.beta1, beta2=self.beta2, eps=self.eps,
            weight_decay=self.weight_decay, gamma=self.gamma, delta=self.delta,
            mu=self.mu, ns_iters=self.ns_iters, hess_interval=self.hess_interval,
        )


_INT_LISTS = {"widths", "seeds"}
_FLOAT_LISTS = {"lr_grid"}


def _coerce(name: str, raw: str):
    target = {f.name: f for f in fields(ExperimentConfig)}.get(name)
    if target is None:
        raise ConfigError(f"unknown config key {name!r}")
    if name in _INT_LISTS:
        return [int(v) for v in raw.split(",") if v.strip() != ""]
    if name in _FLOAT_LISTS:
        return [float(v) for v in raw.split(",") if v.strip() != ""]
    default = getattr(ExperimentConfig(), name)
    if isinstance(default, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(default, int) and not isinstance(default, bool):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if isinstance(default, (OptimizerKind, Scheme, Activation, LossKind)):
        return type(default)(raw.lower())
    return raw


def parse_config_text(text: str) -> dict:
    """Parse `key = value` lines into a raw string mapping."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def config_from_mapping(mapping: dict) -> ExperimentConfig:
    kwargs = {}
    for key, raw in mapping.items():
        if raw is None:
            continue
        kwargs[key] = _coerce(key, raw) if isinstance(raw, str) else raw
    try:
        return ExperimentConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config_file(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config_text(p.read_text(encoding="utf-8"))
