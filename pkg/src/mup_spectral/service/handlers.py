"""Request -> response functions shared by the HTTP endpoints and the CLI.

Each handler is a pure function of its request model, so the CLI can execute
them in-process and the service simply exposes them over HTTP.
"""

import csv
import io

import numpy as np

from ..diagnostics import rank_probe, spectral_probe
from ..harness.config import config_from_mapping
from ..harness.plots import render_svg
from ..harness.sweep import coord_csv, run_coord_check, run_lr_sweep, sweep_csv
from ..model import Activation, LossKind, backward, build, forward, mlp_specs
from ..optim import Trainer
from ..scaling import OptimizerKind, Scheme, rule_table, rules_for
from .schemas import (
    CoordCheckResponse,
    CoordRecordModel,
    ExperimentRequest,
    PlotRequest,
    PlotResponse,
    ProbeRequest,
    ProbeResponse,
    ProbeRowModel,
    ResultRowModel,
    RulesRequest,
    RulesResponse,
    SweepResponse,
)

PROBE_CSV_HEADER = "width,layer,spec_w,spec_dw,target,ratio_w,ratio_dw,grad_rank,grad_frob_spec_ratio,converged"


def experiment_config(req: ExperimentRequest):
    return config_from_mapping({k: v for k, v in req.model_dump().items() if v is not None})


def handle_rules(req: RulesRequest) -> RulesResponse:
    table = rule_table(
        OptimizerKind(req.optimizer), req.widths, req.depth,
        scheme=Scheme(req.scheme), input_dim=req.input_dim, output_dim=req.output_dim,
    )
    return RulesResponse(table=table)


def handle_lr_sweep(req: ExperimentRequest) -> SweepResponse:
    rows = run_lr_sweep(experiment_config(req))
    return SweepResponse(csv=sweep_csv(rows), rows=[ResultRowModel(**vars(r)) for r in rows])


def handle_coord_check(req: ExperimentRequest) -> CoordCheckResponse:
    records = run_coord_check(experiment_config(req))
    return CoordCheckResponse(csv=coord_csv(records),
                              records=[CoordRecordModel(**vars(r)) for r in records])


def handle_probe(req: ProbeRequest) -> ProbeResponse:
    """Build each width, take one single-sample step, and report spectral/rank probes."""
    kind = OptimizerKind(req.optimizer)
    scheme = Scheme(req.scheme)
    probes: list[ProbeRowModel] = []
    rng = np.random.default_rng(req.seed)
    for width in req.widths:
        specs = mlp_specs(req.input_dim, width, req.output_dim, req.depth)
        mlp = build(specs, scheme, kind, req.seed, Activation.IDENTITY)
        rules = rules_for(kind, specs, scheme)
        before = mlp.copy()
        x = rng.standard_normal((req.input_dim, 1))
        y = rng.standard_normal((req.output_dim, 1))
        trace = forward(mlp, x)
        grads = backward(mlp, trace, y, LossKind.MSE)
        trainer = Trainer(mlp, kind, experiment_hp(req), rules, LossKind.MSE, probe_seed=req.seed)
        trainer.train_step(x, y)
        if kind == OptimizerKind.ADOPT:  # first call only seeds the second moment
            trainer.train_step(x, y)
        spectral = spectral_probe(before, mlp, rules)
        ranks = {r.layer: r for r in rank_probe(grads, batch_size=1)}
        for p in spectral:
            rk = ranks[p.layer]
            probes.append(ProbeRowModel(
                width=width, layer=p.layer, spec_w=p.spec_w, spec_dw=p.spec_dw,
                target=p.target, ratio_w=p.ratio_w, ratio_dw=p.ratio_dw,
                grad_rank=rk.rank, grad_frob_spec_ratio=rk.frob_spec_ratio,
                converged=p.converged,
            ))
    lines = [PROBE_CSV_HEADER]
    for p in probes:
        lines.append(f"{p.width},{p.layer},{p.spec_w!r},{p.spec_dw!r},{p.target!r},"
                     f"{p.ratio_w!r},{p.ratio_dw!r},{p.grad_rank},{p.grad_frob_spec_ratio!r},"
                     f"{int(p.converged)}")
    return ProbeResponse(csv="\n".join(lines) + "\n", probes=probes)


def experiment_hp(req: ProbeRequest):
    from ..optim import HyperParams

    return HyperParams(eta=req.lr)


def handle_plot(req: PlotRequest) -> PlotResponse:
    rows = list(csv.DictReader(io.StringIO(req.csv)))
    return PlotResponse(svg=render_svg(rows, req.kind))
