"""Harness artifacts: per-seed checks, deterministic reruns, file layout."""

import json

from affsim.config import default_config
from affsim.harness import SEEDS_PER_RUN, run_experiment


def _strip_volatile(report_path):
    d = json.loads(report_path.read_text())
    d.pop("timestamp")
    d.pop("wall_seconds")
    return d


def test_run_writes_artifacts_and_seed_suffixes(tmp_path):
    cfg = default_config(
        "martingale", replicas=2000, seed=777, out_dir=str(tmp_path)
    )
    report = run_experiment(cfg)
    out = tmp_path / "martingale"
    assert (out / "report.json").is_file()
    assert report.files
    for name in report.files:
        assert (out / name).is_file()
        assert name.startswith("martingale.")
        assert name.endswith(".csv")
    # every check was run once per harness seed, tagged with its seed
    suffixes = {c.name.rsplit("@", 1)[1] for c in report.checks}
    assert suffixes == {f"seed{777 + k}" for k in range(SEEDS_PER_RUN)}
    # CSV header row carries one label per column
    first = (out / report.files[0]).read_text().splitlines()
    ncols = len(first[0].split(","))
    assert all(len(line.split(",")) == ncols for line in first[1:])


def test_rerun_is_byte_identical(tmp_path):
    dir_a, dir_b = tmp_path / "a", tmp_path / "b"
    cfg_a = default_config("martingale", replicas=1500, seed=5, out_dir=str(dir_a))
    cfg_b = default_config("martingale", replicas=1500, seed=5, out_dir=str(dir_b))
    rep_a = run_experiment(cfg_a)
    rep_b = run_experiment(cfg_b)
    assert rep_a.files == rep_b.files
    for name in rep_a.files:
        assert (dir_a / "martingale" / name).read_bytes() == (
            dir_b / "martingale" / name
        ).read_bytes()
    da = _strip_volatile(dir_a / "martingale" / "report.json")
    db = _strip_volatile(dir_b / "martingale" / "report.json")
    da["config"].pop("out_dir")
    db["config"].pop("out_dir")
    assert da == db


def test_different_seed_changes_samples(tmp_path):
    dir_a, dir_b = tmp_path / "a", tmp_path / "b"
    rep_a = run_experiment(
        default_config("martingale", replicas=1500, seed=5, out_dir=str(dir_a))
    )
    rep_b = run_experiment(
        default_config("martingale", replicas=1500, seed=6, out_dir=str(dir_b))
    )
    names_a = {n.split("seed")[0] for n in rep_a.files}
    names_b = {n.split("seed")[0] for n in rep_b.files}
    assert names_a == names_b
    assert any(
        (dir_a / "martingale" / a).read_bytes() != (dir_b / "martingale" / b).read_bytes()
        for a, b in zip(sorted(rep_a.files), sorted(rep_b.files))
    )


def test_write_false_leaves_no_files(tmp_path):
    cfg = default_config("martingale", replicas=1500, seed=9, out_dir=str(tmp_path))
    report = run_experiment(cfg, write=False)
    assert report.checks
    assert not (tmp_path / "martingale").exists()
