"""Shared fixtures: generated scenarios and pipeline runs.

Scenario generation and full pipeline runs are comparatively expensive, so
they are session-scoped and shared across test modules.
"""

from __future__ import annotations

import pytest

from radarloc.pipeline import PipelineConfig, gen_scenario, run_pipeline


@pytest.fixture(scope="session")
def trt_dir(tmp_path_factory):
    """Generated two-right-turns scenario directory."""
    out = tmp_path_factory.mktemp("trt")
    gen_scenario("two-right-turns", out)
    return out


@pytest.fixture(scope="session")
def trt_run(trt_dir):
    """Full pipeline run on the two-right-turns scenario.

    Returns (config, report, run_dir).
    """
    cfg = PipelineConfig.load(trt_dir / "pipeline.yaml")
    report = run_pipeline(cfg)
    return cfg, report, trt_dir / "run"
