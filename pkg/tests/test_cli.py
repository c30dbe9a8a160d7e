from __future__ import annotations

import json
import math

import numpy as np
import pytest

from ionize3d.cli import SUBCOMMANDS, emit_series, main, read_series, run_pipeline
from ionize3d.config import ConfigError, ExperimentConfig, apply_overrides, config_from_dict, load_config


def write_config(path, **sections):
    path.write_text(json.dumps(sections))
    return str(path)


@pytest.fixture
def short_config(tmp_path):
    return write_config(tmp_path / "c.json", grid={"t_end": 20.0, "h": 2e-3}, observables={"radii": [2.0], "decay_window": [5.0, 18.0]})


def test_config_defaults_and_overrides():
    cfg = config_from_dict({})
    assert cfg == ExperimentConfig()
    cfg = apply_overrides(cfg, ["grid.h=0.002", "drive.omega=3", "output.formats=[\"json\"]"])
    assert cfg.grid.h == 0.002 and cfg.drive.omega == 3 and cfg.output.formats == ("json",)
    with pytest.raises(ConfigError):
        apply_overrides(cfg, ["grid.nope=1"])
    with pytest.raises(ConfigError):
        apply_overrides(cfg, ["grid.h"])
    with pytest.raises(ConfigError):
        config_from_dict({"drive": {"coefficients": [[1, 0.1, 0.0]]}})


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_emit_series_header_only_for_empty(tmp_path):
    path = emit_series(tmp_path / "e.csv", {"t": np.zeros(0), "x": np.zeros(0)})
    assert path.read_text().strip() == "t,x"
    with pytest.raises(ValueError):
        emit_series(tmp_path / "bad.csv", {"t": np.zeros(2), "x": np.zeros(3)})


def test_emit_series_reports_path_on_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="file"):
        emit_series(blocker / "sub" / "x.csv", {"t": np.zeros(1)})


def test_solve_subcommand_writes_artifacts(tmp_path, short_config, capsys):
    out = tmp_path / "run"
    code = main(["survival", "--config", short_config, "--out", str(out)])
    printed = capsys.readouterr().out
    assert "apriori_bound: PASS" in printed
    series = read_series(out / "series.csv")
    assert list(series)[:4] == ["t", "re_q", "im_q", "abs_q"]
    assert "abs_theta" in series
    assert series["t"][0] == 0.0
    report = json.loads((out / "report.json").read_text())
    assert list(report) == ["version", "units", "config", "stages", "acceptance", "errors", "timing"]
    assert report["config"]["grid"]["t_end"] == 20.0
    assert report["stages"]["genericity"]["verdict"] == "Generic"
    assert (out / "ball_R2.csv").exists()
    # short run: the ball has not emptied far enough, and the exit code says so
    assert code == (0 if all(report["acceptance"].values()) else 1)


def test_reports_identical_except_timing(tmp_path, short_config):
    reports = []
    for name in ("a", "b"):
        out = tmp_path / name
        main(["modes", "--config", short_config, "--out", str(out)])
        reports.append(json.loads((out / "report.json").read_text()))
        del reports[-1]["timing"]
        del reports[-1]["config"]["output"]["directory"]
    assert reports[0] == reports[1]
    assert (tmp_path / "a" / "series.csv").read_bytes() == (tmp_path / "b" / "series.csv").read_bytes()


def test_stationary_config_passes(tmp_path):
    cfg = write_config(tmp_path / "s.json", drive={"coefficients": [[0, -1 / (4 * math.pi), 0.0]]}, grid={"t_end": 20.0})
    code = main(["survival", "--config", cfg, "--out", str(tmp_path / "o")])
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["acceptance"]["stationary"] is True
    assert code == 0


def test_geometric_drive_recorded_nongeneric(tmp_path):
    coeffs = [[n, 0.5 ** abs(n) * 0.05, 0.0] for n in range(-40, 41) if n != 0] + [[0, -0.2, 0.0]]
    cfg = write_config(tmp_path / "g.json", drive={"coefficients": coeffs}, modes={"M": 64})
    main(["genericity", "--config", cfg, "--out", str(tmp_path / "o")])
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["stages"]["genericity"]["verdict"] == "NonGeneric"
    assert report["stages"]["genericity"]["plateau"] == pytest.approx(0.5, rel=1e-6)


def test_stage_failure_is_recorded(tmp_path):
    cfg = config_from_dict({"grid": {"t_end": 2.0, "h": 0.01}, "modes": {"fit_window": [1e-6, 1e-2], "fit_order": 0}})
    report = run_pipeline(cfg, ("classify", "solve", "decayfit"), tmp_path)
    assert "decayfit" in report.errors
    assert report.stages["solve"]["count"] == 201
    assert not report.passed


def test_bad_config_exit_code(tmp_path, capsys):
    assert main(["solve", "--config", str(tmp_path / "none.json")]) == 2
    assert "cannot read config" in capsys.readouterr().err


def test_subcommand_table():
    assert set(SUBCOMMANDS) == {"classify", "genericity", "solve", "survival", "modes", "branchfit", "decayfit", "full"}
    for stages in SUBCOMMANDS.values():
        assert stages[0] == "classify"
