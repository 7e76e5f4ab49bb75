import json

import pytest

from radarloc.cli import EXIT_INPUT, EXIT_OK, EXIT_STAGE, _parse_overrides, main


def test_parse_overrides_forms():
    out = _parse_overrides(["--seed", "3", "--gamma=0.02", "--out-dir", "x"])
    assert out == {"seed": "3", "gamma": "0.02", "out_dir": "x"}


def test_parse_overrides_errors():
    with pytest.raises(SystemExit):
        _parse_overrides(["positional"])
    with pytest.raises(SystemExit):
        _parse_overrides(["--seed"])  # missing value
    with pytest.raises(SystemExit):
        _parse_overrides(["--no-such-key", "1"])


def test_run_missing_config_exits_input(capsys, tmp_path):
    code = main(["run", "--config", str(tmp_path / "nope.yaml")])
    assert code == EXIT_INPUT
    assert "error:" in capsys.readouterr().err


def test_gen_scenario_unknown_exits_input(tmp_path):
    code = main(["gen-scenario", "no-such", "--out", str(tmp_path)])
    assert code == EXIT_INPUT


def test_stage_failure_exits_stage(trt_dir, trt_run, tmp_path):
    _, _, full_dir = trt_run
    out = tmp_path / "out"
    out.mkdir()
    (out / "tracks.jsonl").write_bytes((full_dir / "tracks.jsonl").read_bytes())
    code = main(["stage", "label", "--config", str(trt_dir / "pipeline.yaml"),
                 "--out", str(out), "--select-track-ids", "9999"])
    assert code == EXIT_STAGE


def test_full_run_via_cli(capsys, trt_dir, tmp_path):
    code = main(["run", "--config", str(trt_dir / "pipeline.yaml"),
                 "--out", str(tmp_path / "cli_run")])
    assert code == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert "t_utm" in doc and "diagnostics" in doc
    assert (tmp_path / "cli_run" / "report.json").exists()


def test_gen_scenario_via_cli(capsys, tmp_path):
    code = main(["gen-scenario", "two-right-turns", "--out",
                 str(tmp_path / "scn"), "--seed", "2"])
    assert code == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["vehicles"] == 1
    assert (tmp_path / "scn" / "pipeline.yaml").exists()
