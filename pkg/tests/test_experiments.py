"""Reduced-scale smoke runs of the cheap experiments.

Full-scale runs with the spec tolerances live in test_acceptance.py; these
runs only exercise the experiment plumbing: check and table structure,
determinism of the dispatch, and graceful degradation at tiny scale.
"""

import math

import numpy as np
import pytest

from affsim.config import default_config
from affsim.errors import DomainError
from affsim.experiments import run_experiment_once

SMOKE = [
    ("identities", dict(replicas=10)),
    ("radial", dict(replicas=3000, steps=500)),
    ("endorbit", dict(replicas=10_000)),
    ("kirillov", dict(replicas=10_000)),
    ("martingale", dict(replicas=3000)),
    ("gauge", dict()),
]


@pytest.mark.parametrize("name,overrides", SMOKE, ids=[s[0] for s in SMOKE])
def test_smoke_run_passes(name, overrides):
    cfg = default_config(name, **overrides)
    checks, tables = run_experiment_once(cfg, cfg.seed)
    assert checks, "experiment produced no checks"
    for c in checks:
        assert c.name.startswith(f"{name}.")
        assert math.isfinite(c.statistic)
        assert c.passed, f"{c.name}: stat={c.statistic} tol={c.tolerance} {c.detail}"
    for base, (cols, rows) in tables.items():
        arr = np.asarray(rows, dtype=float)
        assert arr.ndim == 2 and arr.shape[1] == len(cols)
        assert np.all(np.isfinite(arr))


def test_dispatch_rejects_unknown():
    cfg = default_config("radial")
    object.__setattr__(cfg, "experiment", "bogus")
    with pytest.raises(DomainError):
        run_experiment_once(cfg, 1)


def test_runs_are_deterministic_per_seed():
    cfg = default_config("martingale", replicas=1000)
    a_checks, a_tables = run_experiment_once(cfg, 123)
    b_checks, b_tables = run_experiment_once(cfg, 123)
    assert a_checks == b_checks
    for key in a_tables:
        np.testing.assert_array_equal(
            np.asarray(a_tables[key][1], dtype=float),
            np.asarray(b_tables[key][1], dtype=float),
        )
    c_checks, _ = run_experiment_once(cfg, 124)
    assert [c.statistic for c in c_checks] != [c.statistic for c in a_checks]


def test_condorbit_underpowered_run_fails_cleanly():
    # below the occupancy floor the check fails with a clear detail, no NaN
    cfg = default_config("condorbit", replicas=500, steps=100)
    checks, tables = run_experiment_once(cfg, 7)
    (check,) = checks
    assert not check.passed
    assert check.statistic == 0.0
    assert "occupancy floor" in check.detail
    assert tables["cells"][1] == []
