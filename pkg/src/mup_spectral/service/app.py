"""FastAPI wiring around the handler functions."""

from fastapi import FastAPI, HTTPException

from ..harness.config import ConfigError
from . import handlers
from .schemas import (
    CoordCheckResponse,
    ExperimentRequest,
    HealthResponse,
    PlotRequest,
    PlotResponse,
    ProbeRequest,
    ProbeResponse,
    RulesRequest,
    RulesResponse,
    SweepResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(title="mup-spectral", version="0.1.0")

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse()

    @app.post("/rules", response_model=RulesResponse)
    def rules(req: RulesRequest):
        return _guard(handlers.handle_rules, req)

    @app.post("/lr-sweep", response_model=SweepResponse)
    def lr_sweep(req: ExperimentRequest):
        return _guard(handlers.handle_lr_sweep, req)

    @app.post("/coord-check", response_model=CoordCheckResponse)
    def coord_check(req: ExperimentRequest):
        return _guard(handlers.handle_coord_check, req)

    @app.post("/probe", response_model=ProbeResponse)
    def probe(req: ProbeRequest):
        return _guard(handlers.handle_probe, req)

    @app.post("/plot", response_model=PlotResponse)
    def plot(req: PlotRequest):
        return _guard(handlers.handle_plot, req)

    return app


def _guard(handler, req):
    try:
        return handler(req)
    except (ConfigError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


app = create_app()
