"""HTTP service exposing the pipeline stages as JSON endpoints."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__, _gf2
from . import runners
from . import schemas as s


def create_app() -> FastAPI:
    app = FastAPI(
        title="qrng-pipeline",
        description=(
            "Simulated vacuum-noise randomness pipeline: source simulation, "
            "min-entropy estimation, Toeplitz extraction, and statistical "
            "validation as HTTP endpoints."
        ),
        version=__version__,
    )

    def guarded(fn, req):
        try:
            return fn(req)
        except (ValueError, FileNotFoundError, IndexError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    @app.get("/health", response_model=s.HealthResponse)
    def health() -> s.HealthResponse:
        return s.HealthResponse(
            status="ok", version=__version__, numba=_gf2.NUMBA_AVAILABLE
        )

    @app.post("/simulate", response_model=s.SimulateResponse)
    def simulate(req: s.SimulateRequest) -> s.SimulateResponse:
        return guarded(runners.run_simulate, req)

    @app.post("/estimate", response_model=s.EstimateResponse)
    def estimate(req: s.EstimateRequest) -> s.EstimateResponse:
        return guarded(runners.run_estimate, req)

    @app.post("/extract", response_model=s.ExtractResponse)
    def extract(req: s.ExtractRequest) -> s.ExtractResponse:
        return guarded(runners.run_extract, req)

    @app.post("/analyze", response_model=s.AnalyzeResponse)
    def analyze(req: s.AnalyzeRequest) -> s.AnalyzeResponse:
        return guarded(runners.run_analyze, req)

    @app.post("/run", response_model=s.RunResponse)
    def run(req: s.RunRequest) -> s.RunResponse:
        return guarded(runners.run_run, req)

    @app.post("/bench", response_model=s.BenchResponse)
    def bench(req: s.BenchRequest) -> s.BenchResponse:
        return guarded(runners.run_bench, req)

    return app


app = create_app()
