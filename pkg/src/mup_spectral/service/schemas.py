"""Pydantic request/response models for the HTTP service and the CLI client."""

from typing import Literal, Optional

from pydantic import BaseModel, Field


class ExperimentRequest(BaseModel):
    """Mirror of the flat experiment config; unset fields use the config defaults."""

    task: Optional[Literal["teacher_student", "char_lm"]] = None
    optimizer: Optional[str] = None
    scheme: Optional[Literal["sp", "mup"]] = None
    widths: Optional[list[int]] = None
    depth: Optional[int] = None
    lr_grid: Optional[list[float]] = None
    seeds: Optional[list[int]] = None
    steps: Optional[int] = None
    batch_size: Optional[int] = None
    activation: Optional[Literal["identity", "relu", "tanh"]] = None
    loss: Optional[Literal["mse", "softmax_ce"]] = None
    input_dim: Optional[int] = None
    output_dim: Optional[int] = None
    teacher_width: Optional[int] = None
    n_train: Optional[int] = None
    n_val: Optional[int] = None
    data_seed: Optional[int] = None
    corpus_path: Optional[str] = None
    context_len: Optional[int] = None
    val_fraction: Optional[float] = None
    beta1: Optional[float] = None
    beta2: Optional[float] = None
    eps: Optional[float] = None
    weight_decay: Optional[float] = None
    gamma: Optional[float] = None
    delta: Optional[float] = None
    mu: Optional[float] = None
    ns_iters: Optional[int] = None
    hess_interval: Optional[int] = None


class ResultRowModel(BaseModel):
    width: int
    lr: float
    seed: int
    steps_completed: int
    train_loss: float
    val_loss: float
    diverged: bool


class SweepResponse(BaseModel):
    csv: str
    rows: list[ResultRowModel]


class CoordRecordModel(BaseModel):
    width: int
    step: int
    layer: int
    rms_coord: float
    rel_to_first: float
    flagged: bool


class CoordCheckResponse(BaseModel):
    csv: str
    records: list[CoordRecordModel]


class RulesRequest(BaseModel):
    optimizer: str = "adamw"
    scheme: Literal["sp", "mup"] = "mup"
    widths: list[int] = Field(default_factory=lambda: [64, 128, 256])
    depth: int = 3
    input_dim: int = 16
    output_dim: int = 16


class RulesResponse(BaseModel):
    table: str


class ProbeRequest(BaseModel):
    optimizer: str = "adamw"
    scheme: Literal["sp", "mup"] = "mup"
    widths: list[int] = Field(default_factory=lambda: [64, 128, 256])
    depth: int = 3
    seed: int = 0
    lr: float = 0.01
    input_dim: int = 16
    output_dim: int = 8


class ProbeRowModel(BaseModel):
    width: int
    layer: int
    spec_w: float
    spec_dw: float
    target: float
    ratio_w: float
    ratio_dw: float
    grad_rank: int
    grad_frob_spec_ratio: float
    converged: bool


class ProbeResponse(BaseModel):
    csv: str
    probes: list[ProbeRowModel]


class PlotRequest(BaseModel):
    kind: Literal["loss_vs_lr_by_width", "coord_check_by_width"]
    csv: str


class PlotResponse(BaseModel):
    svg: str


class HealthResponse(BaseModel):
    status: str = "ok"
