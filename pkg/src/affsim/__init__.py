"""Simulation and verification toolkit for compact-group radial processes.

The package has three layers:

* exact special functions on a compact simple Lie group: root-system
  data (`rootsys`), Weyl characters and heat kernels (`charfun`), and
  the affine theta-like series entering the conditioned process
  (`affinephi`);
* samplers: algebra-valued Brownian motion and its stochastic
  exponential (`groupsim`), and the space-time walk conditioned to stay
  in the fundamental alcove (`doobsim`);
* the experiment battery (`experiments`, `harness`, `cli`) that checks
  the closed forms against Monte Carlo at fixed seeds and writes CSV
  tables plus a JSON report per experiment.

Entry point: ``python -m affsim run <experiment>`` or the
:func:`affsim.harness.run_experiment` API.
"""

from .config import EXPERIMENTS, ExperimentConfig
from .errors import (
    AffsimError,
    ConfigError,
    DegenerateEstimateError,
    DomainError,
    PrecisionError,
    SamplingEfficiencyError,
    UsageError,
)
from .harness import run_experiment
from .report import CheckResult, ExperimentReport

__all__ = [
    "AffsimError",
    "CheckResult",
    "ConfigError",
    "DegenerateEstimateError",
    "DomainError",
    "EXPERIMENTS",
    "ExperimentConfig",
    "ExperimentReport",
    "PrecisionError",
    "SamplingEfficiencyError",
    "UsageError",
    "run_experiment",
]

__version__ = "0.1.0"
