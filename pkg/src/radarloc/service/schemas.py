"""Pydantic request/response models for the pipeline service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class ConfigPayload(BaseModel):
    """Pipeline configuration: optional path to a config file on the server
    plus flat key overrides applied on top."""

    config_path: str | None = None
    overrides: dict[str, str | int | float] = Field(default_factory=dict)


class RunRequest(ConfigPayload):
    pass


class StageRequest(ConfigPayload):
    stage: str


class ScenarioRequest(BaseModel):
    spec: str                  # bundled scenario name or server-side spec path
    out_dir: str
    seed: int | None = None


class TransformModel(BaseModel):
    r: list[list[float]]
    t: list[float]


class PoseModel(BaseModel):
    x: float
    y: float
    yaw: float


class RunResponse(BaseModel):
    t_coarse: TransformModel
    t_fine: PoseModel
    t_utm: TransformModel
    diagnostics: dict
    timings: dict


class StageResponse(BaseModel):
    stage: str
    diagnostics: dict


class ScenarioResponse(BaseModel):
    frames: int
    vehicles: int
    birth_regions: int
    out_dir: str


class ErrorResponse(BaseModel):
    detail: str
    kind: str                  # "input" | "stage"
    stage: str | None = None
