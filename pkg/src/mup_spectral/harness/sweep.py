"""Width x learning-rate sweeps and coordinate-check orchestration.

Sweep cells are independent; MUP_THREADS > 1 runs them in a thread pool and
results are emitted in deterministic (width, lr, seed) order regardless of
completion order, so repeated runs produce byte-identical CSV.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..diagnostics import CoordCheckRecord, coordinate_check
from ..model import DivergenceError, LossKind, build, forward, loss, mlp_specs
from ..optim import Trainer, UpdateError
from ..scaling import rules_for
from .config import ExperimentConfig
from .tasks import TaskData, gen_teacher_student, load_text_corpus

COORD_CSV_HEADER = "width,step,layer,rms_coord,rel_to_first"
SWEEP_CSV_HEADER = "width,lr,seed,steps_completed,train_loss,val_loss,diverged"


@dataclass
class ResultRow:
    width: int
    lr: float
    seed: int
    steps_completed: int
    train_loss: float
    val_loss: float
    diverged: bool


def build_task(config: ExperimentConfig) -> TaskData:
    if config.task == "char_lm":
        return load_text_corpus(config.corpus_path, config.context_len, config.val_fraction)
    return gen_teacher_student(
        config.data_seed, config.input_dim, config.output_dim,
        config.n_train, config.n_val, config.teacher_width,
    )


def _batch(task: TaskData, step_index: int, batch_size: int):
    n = task.train_x.shape[1]
    lo = (step_index * batch_size) % n
    idx = np.arange(lo, lo + batch_size) % n
    xb = task.train_x[:, idx]
    yb = task.train_y[:, idx] if task.train_y.ndim == 2 else task.train_y[idx]
    return xb, yb


def _eval_loss(mlp, x, y, kind: LossKind) -> float:
    return loss(forward(mlp, x), y, kind)


def _run_cell(config: ExperimentConfig, task: TaskData, width: int, lr: float, seed: int) -> ResultRow:
    specs = mlp_specs(task.input_dim, width, task.output_dim, config.depth)
    mlp = build(specs, config.scheme, config.optimizer, seed, config.activation)
    hp = config.hyperparams(eta=lr)
    trainer = Trainer(mlp, config.optimizer, hp, rules_for(config.optimizer, specs, config.scheme),
                      config.loss, probe_seed=seed)
    completed = 0
    try:
        for t in range(config.steps):
            xb, yb = _batch(task, t, config.batch_size)
            trainer.train_step(xb, yb)
            completed = t + 1
        train_loss = _eval_loss(mlp, task.train_x, task.train_y, config.loss)
        val_loss = _eval_loss(mlp, task.val_x, task.val_y, config.loss)
        if not (np.isfinite(train_loss) and np.isfinite(val_loss)):
            raise DivergenceError("non-finite evaluation loss")
        return ResultRow(width, lr, seed, completed, train_loss, val_loss, False)
    except (DivergenceError, UpdateError):
        return ResultRow(width, lr, seed, completed, float("nan"), float("nan"), True)


def thread_count() -> int:
    raw = os.environ.get("MUP_THREADS", "")
    try:
        return max(int(raw), 0) if raw else 0
    except ValueError:
        return 0


def run_lr_sweep(config: ExperimentConfig) -> list[ResultRow]:
    """Train every (width, lr, seed) cell and report final train/validation loss.

    Divergence yields a flagged row rather than aborting the sweep.
    """
    task = build_task(config)
    cells = [(w, lr, s) for w in config.widths for lr in config.lr_grid for s in config.seeds]
    workers = thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda c: _run_cell(config, task, *c), cells))
    else:
        rows = [_run_cell(config, task, *cell) for cell in cells]
    rows.sort(key=lambda r: (r.width, r.lr, r.seed))
    return rows


def run_coord_check(config: ExperimentConfig) -> list[CoordCheckRecord]:
    """Coordinate check across config.widths using the first lr_grid entry."""
    task = build_task(config)
    return coordinate_check(
        widths=config.widths,
        depth=config.depth,
        kind=config.optimizer,
        scheme=config.scheme,
        steps=config.steps,
        seed=config.seeds[0],
        task=task,
        hp=config.hyperparams(eta=config.lr_grid[0]),
        activation=config.activation,
        loss_kind=config.loss,
        batch_size=config.batch_size,
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def coord_csv(records: list[CoordCheckRecord]) -> str:
    lines = [COORD_CSV_HEADER]
    for r in records:
        lines.append(f"{r.width},{r.step},{r.layer},{_fmt(r.rms_coord)},{_fmt(r.rel_to_first)}")
    return "\n".join(lines) + "\n"


def sweep_csv(rows: list[ResultRow]) -> str:
    lines = [SWEEP_CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r.width},{_fmt(r.lr)},{r.seed},{r.steps_completed},"
            f"{_fmt(r.train_loss)},{_fmt(r.val_loss)},{int(r.diverged)}"
        )
    return "\n".join(lines) + "\n"


def mean_val_loss_by_cell(rows: list[ResultRow]) -> dict[tuple[int, float], float]:
    """Mean validation loss over seeds per (width, lr); nan if any seed diverged."""
    groups: dict[tuple[int, float], list[float]] = {}
    for r in rows:
        groups.setdefault((r.width, r.lr), []).append(float("nan") if r.diverged else r.val_loss)
    return {k: float(np.mean(v)) for k, v in groups.items()}
