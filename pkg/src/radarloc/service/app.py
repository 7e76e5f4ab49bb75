"""FastAPI application wrapping the localization pipeline.

The service operates on files local to the server process; requests carry
paths and flat configuration overrides, responses carry the report data.
"""

from __future__ import annotations

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from ..errors import InputError, RadarLocError, StageError
from ..pipeline import PipelineConfig, gen_scenario, run_pipeline, run_stage
from .schemas import (
    ConfigPayload,
    RunRequest,
    RunResponse,
    ScenarioRequest,
    ScenarioResponse,
    StageRequest,
    StageResponse,
)


def _build_config(payload: ConfigPayload) -> PipelineConfig:
    cfg = PipelineConfig.load(payload.config_path) if payload.config_path \
        else PipelineConfig()
    for key, value in payload.overrides.items():
        cfg.set(key, value)
    return cfg


def create_app() -> FastAPI:
    app = FastAPI(title="radarloc", version="0.1.0")

    @app.exception_handler(RadarLocError)
    async def _handle_error(_, exc: RadarLocError):
        if isinstance(exc, StageError):
            return JSONResponse(status_code=422, content={
                "detail": str(exc), "kind": "stage", "stage": exc.stage})
        kind = "input" if isinstance(exc, InputError) else "stage"
        status = 400 if kind == "input" else 422
        return JSONResponse(status_code=status, content={
            "detail": str(exc), "kind": kind, "stage": None})

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/config/defaults")
    def config_defaults():
        return PipelineConfig().__dict__

    @app.post("/pipeline/run", response_model=RunResponse)
    def pipeline_run(req: RunRequest):
        report = run_pipeline(_build_config(req))
        doc = report.to_dict()
        doc["timings"] = {k: round(v, 3) for k, v in report.timings.items()}
        return doc

    @app.post("/pipeline/stage", response_model=StageResponse)
    def pipeline_stage(req: StageRequest):
        diagnostics = run_stage(_build_config(req), req.stage)
        return {"stage": req.stage, "diagnostics": diagnostics}

    @app.post("/scenario/generate", response_model=ScenarioResponse)
    def scenario_generate(req: ScenarioRequest):
        return gen_scenario(req.spec, req.out_dir, req.seed)

    return app


app = create_app()
