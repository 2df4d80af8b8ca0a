"""Command-line client for the scaling-rule service.

Subcommands build the same request models the HTTP endpoints accept and run
the handlers in-process by default; pass --server to send the request to a
running service instead. Flags override config-file keys of the same name.

Exit codes: 0 success, 2 usage, 3 configuration, 4 file I/O, 1 runtime.
"""

import argparse
import sys
from dataclasses import fields as dataclass_fields
from enum import Enum
from pathlib import Path

from .harness.config import ConfigError, ExperimentConfig, config_from_mapping, load_config_file
from .optim import UpdateError
from .service import handlers
from .service.schemas import (
    CoordCheckResponse,
    ExperimentRequest,
    PlotRequest,
    PlotResponse,
    ProbeRequest,
    ProbeResponse,
    RulesRequest,
    RulesResponse,
    SweepResponse,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_IO = 4


def _add_common(sub):
    sub.add_argument("--config", help="flat key = value config file")
    sub.add_argument("--optimizer", help="adamw|adopt|lamb|sophia|shampoo|muon")
    sub.add_argument("--scheme", help="sp|mup")
    sub.add_argument("--widths", help="comma-separated hidden widths")
    sub.add_argument("--depth", help="number of weight layers")
    sub.add_argument("--lr-grid", dest="lr_grid", help="comma-separated learning rates")
    sub.add_argument("--seeds", help="comma-separated seeds")
    sub.add_argument("--steps", help="training steps per run")
    sub.add_argument("--task", help="teacher_student|char_lm")
    sub.add_argument("--out", help="output path (stdout if omitted)")
    sub.add_argument("--server", help="base URL of a running service; default is in-process")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mup", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True)

    _add_common(subs.add_parser("rules", help="print the per-layer scaling-rule table"))
    _add_common(subs.add_parser("coord-check", help="multi-width feature-scale check, CSV out"))
    _add_common(subs.add_parser("lr-sweep", help="width x lr x seed sweep, CSV out"))

    probe = subs.add_parser("probe", help="one-step spectral and gradient-rank probes, CSV out")
    _add_common(probe)
    probe.add_argument("--seed", help="model seed")
    probe.add_argument("--lr", help="learning rate for the probe step")

    plot = subs.add_parser("plot", help="render a CSV produced by coord-check or lr-sweep as SVG")
    plot.add_argument("--kind", required=True, choices=["loss_vs_lr_by_width", "coord_check_by_width"])
    plot.add_argument("--rows", required=True, help="input CSV path")
    plot.add_argument("--out", help="output SVG path (stdout if omitted)")
    plot.add_argument("--server", help="base URL of a running service")

    serve = subs.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


_OVERRIDE_KEYS = ("optimizer", "scheme", "widths", "depth", "lr_grid", "seeds",
                  "steps", "task")


def _merged_config(args) -> ExperimentConfig:
    mapping: dict = {}
    if args.config:
        mapping.update(load_config_file(args.config))
    for key in _OVERRIDE_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            mapping[key] = value
    return config_from_mapping(mapping)


def _experiment_request(args) -> ExperimentRequest:
    cfg = _merged_config(args)
    payload = {}
    for f in dataclass_fields(ExperimentConfig):
        v = getattr(cfg, f.name)
        payload[f.name] = v.value if isinstance(v, Enum) else v
    return ExperimentRequest(**payload)


def _remote(server: str, path: str, req, resp_model):
    import httpx

    r = httpx.post(server.rstrip("/") + path, json=req.model_dump(), timeout=None)
    r.raise_for_status()
    return resp_model.model_validate(r.json())


def _call(args, path, req, resp_model, handler):
    if getattr(args, "server", None):
        return _remote(args.server, path, req, resp_model)
    return handler(req)


def _emit(args, text: str) -> None:
    if getattr(args, "out", None):
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _run_rules(args) -> int:
    cfg = _merged_config(args)
    req = RulesRequest(optimizer=cfg.optimizer.value, scheme=cfg.scheme.value,
                       widths=cfg.widths, depth=cfg.depth,
                       input_dim=cfg.input_dim, output_dim=cfg.output_dim)
    resp = _call(args, "/rules", req, RulesResponse, handlers.handle_rules)
    _emit(args, resp.table)
    return EXIT_OK


def _run_coord_check(args) -> int:
    req = _experiment_request(args)
    resp = _call(args, "/coord-check", req, CoordCheckResponse, handlers.handle_coord_check)
    _emit(args, resp.csv)
    return EXIT_OK


def _run_lr_sweep(args) -> int:
    req = _experiment_request(args)
    resp = _call(args, "/lr-sweep", req, SweepResponse, handlers.handle_lr_sweep)
    _emit(args, resp.csv)
    if args.out:
        _print_sweep_summary(resp)
    return EXIT_OK


def _print_sweep_summary(resp: SweepResponse) -> None:
    """Mean validation loss over seeds per (width, lr) cell."""
    groups: dict[tuple[int, float], list[float]] = {}
    for row in resp.rows:
        groups.setdefault((row.width, row.lr), []).append(
            float("nan") if row.diverged else row.val_loss)
    sys.stdout.write("width,lr,mean_val_loss\n")
    for (width, lr), losses in sorted(groups.items()):
        mean = sum(losses) / len(losses)
        sys.stdout.write(f"{width},{lr!r},{mean!r}\n")


def _run_probe(args) -> int:
    cfg = _merged_config(args)
    req = ProbeRequest(
        optimizer=cfg.optimizer.value, scheme=cfg.scheme.value, widths=cfg.widths,
        depth=cfg.depth, input_dim=cfg.input_dim, output_dim=cfg.output_dim,
        seed=int(args.seed) if args.seed is not None else cfg.seeds[0],
        lr=float(args.lr) if args.lr is not None else cfg.lr_grid[0],
    )
    resp = _call(args, "/probe", req, ProbeResponse, handlers.handle_probe)
    _emit(args, resp.csv)
    return EXIT_OK


def _run_plot(args) -> int:
    rows_path = Path(args.rows)
    if not rows_path.is_file():
        raise ConfigError(f"rows file not found: {rows_path}")
    req = PlotRequest(kind=args.kind, csv=rows_path.read_text(encoding="utf-8"))
    resp = _call(args, "/plot", req, PlotResponse, handlers.handle_plot)
    _emit(args, resp.svg)
    return EXIT_OK


def _run_serve(args) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


_COMMANDS = {
    "rules": _run_rules,
    "coord-check": _run_coord_check,
    "lr-sweep": _run_lr_sweep,
    "probe": _run_probe,
    "plot": _run_plot,
    "serve": _run_serve,
}


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the diagnostic
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"mup: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"mup: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (UpdateError, ValueError, RuntimeError) as exc:
        print(f"mup: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
