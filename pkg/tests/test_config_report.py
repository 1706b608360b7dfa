"""Configuration parsing/validation and report serialization."""

import json

import numpy as np
import pytest

from affsim.config import (
    EXPERIMENTS,
    ExperimentConfig,
    default_config,
    load_config,
    with_overrides,
)
from affsim.errors import ConfigError, UsageError
from affsim.report import (
    REPORT_SCHEMA_VERSION,
    CheckResult,
    ExperimentReport,
    report_to_dict,
    summarize_sample,
    write_report_json,
    write_samples_csv,
)


def test_default_configs_exist_for_every_experiment():
    for name in EXPERIMENTS:
        cfg = default_config(name)
        assert cfg.experiment == name
        assert cfg.replicas > 0


def test_config_validation_errors():
    with pytest.raises(ConfigError, match="unknown experiment"):
        ExperimentConfig(experiment="nope")
    with pytest.raises(ConfigError, match="family"):
        ExperimentConfig(experiment="radial", family="B")
    with pytest.raises(ConfigError, match="rank"):
        ExperimentConfig(experiment="radial", rank=0)
    with pytest.raises(ConfigError, match="replicas"):
        ExperimentConfig(experiment="radial", replicas=-5)
    with pytest.raises(ConfigError, match="dt"):
        ExperimentConfig(experiment="radial", dt=0.0)
    with pytest.raises(ConfigError, match="t_grid"):
        ExperimentConfig(experiment="radial", t_grid=(1.0, 0.5))
    with pytest.raises(ConfigError, match="t_grid"):
        ExperimentConfig(experiment="radial", t_grid=(-1.0,))


def test_with_overrides_revalidates():
    cfg = default_config("radial")
    assert with_overrides(cfg, rank=2).rank == 2
    with pytest.raises(ConfigError):
        with_overrides(cfg, rank=9)


def test_load_config_round_trip(tmp_path):
    fn = tmp_path / "exp.cfg"
    fn.write_text(
        "# comment line\n"
        "experiment = radial\n"
        "rank = 2   # trailing comment\n"
        "replicas = 500\n"
        "dt = 5e-4\n"
        "t_grid = 0.25, 0.5, 1.0\n"
    )
    cfg = load_config(fn)
    assert cfg.experiment == "radial"
    assert cfg.rank == 2
    assert cfg.replicas == 500
    assert cfg.dt == 5e-4
    assert cfg.t_grid == (0.25, 0.5, 1.0)
    # unlisted keys keep the experiment defaults
    assert cfg.steps == 2000


def test_load_config_errors(tmp_path):
    cases = [
        ("experiment = radial\nbogus = 3\n", "unknown key"),
        ("experiment = radial\nrank two\n", "key = value"),
        ("experiment = radial\nrank = two\n", "bad value"),
        ("rank = 1\n", "missing required key"),
        ("experiment = radial\nrank = 1\nrank = 2\n", "duplicate"),
        ("experiment = radial\nt_grid = a,b\n", "t_grid"),
    ]
    for body, match in cases:
        fn = tmp_path / "bad.cfg"
        fn.write_text(body)
        with pytest.raises(ConfigError, match=match):
            load_config(fn)


# ---------------------------------------------------------------------------
# report output


def _small_report():
    checks = (
        CheckResult(name="a", statistic=0.5, tolerance=1.0, passed=True, detail="ok"),
        CheckResult(name="b", statistic=2.0, tolerance=1.0, passed=False),
    )
    return ExperimentReport(
        experiment="radial",
        anchor="radial",
        config={"seed": 1, "rank": 1, "replicas": 10},
        checks=checks,
        wall_seconds=1.234,
        samples={},
        files=(),
        timestamp="2026-01-01T00:00:00Z",
    )


def test_report_dict_schema():
    d = report_to_dict(_small_report())
    assert d["schema_version"] == REPORT_SCHEMA_VERSION
    assert d["passed"] is False
    assert [c["name"] for c in d["checks"]] == ["a", "b"]
    assert set(d) == {
        "schema_version",
        "experiment",
        "anchor",
        "config",
        "checks",
        "passed",
        "wall_seconds",
        "samples",
        "files",
        "timestamp",
    }


def test_report_json_stable(tmp_path):
    fn = tmp_path / "report.json"
    write_report_json(_small_report(), fn)
    first = fn.read_bytes()
    write_report_json(_small_report(), fn)
    assert fn.read_bytes() == first
    parsed = json.loads(first)
    assert parsed["experiment"] == "radial"


def test_samples_csv_lossless(tmp_path):
    rows = np.array([[1.0 / 3.0, 2.0**-52], [1e300, -0.0]])
    fn = tmp_path / "s.csv"
    write_samples_csv(fn, ["x[1]", "y[1]"], rows)
    lines = fn.read_text().splitlines()
    assert lines[0] == "x[1],y[1]"
    back = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    np.testing.assert_array_equal(back, rows)


def test_samples_csv_width_mismatch(tmp_path):
    with pytest.raises(UsageError):
        write_samples_csv(tmp_path / "s.csv", ["only"], np.zeros((2, 2)))


def test_summarize_sample_fields():
    s = summarize_sample(np.arange(10.0))
    assert s["count"] == 10
    assert s["mean"] == [4.5]
    assert s["min"] == [0.0] and s["max"] == [9.0]
