"""Experiment configuration: dataclass, per-experiment defaults, text files.

Config files are plain text, one `key = value` per line, `#` comments.
Values are coerced by the field's type; t_grid is comma-separated floats.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError

EXPERIMENTS = (
    "identities",
    "radial",
    "endorbit",
    "kirillov",
    "endpoint",
    "condorbit",
    "martingale",
    "phiQ",
    "entrance",
    "gauge",
    "intertwine",
    "main",
)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    family: str = "A"
    rank: int = 1
    replicas: int = 10000
    steps: int = 1000
    dt: float = 1e-3
    t_grid: tuple[float, ...] = ()
    tail_tol: float = 1e-10
    seed: int = 20260818
    out_dir: str = "results"
    mode: str = ""

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {self.experiment!r}; "
                f"known: {', '.join(EXPERIMENTS)}"
            )
        if self.family != "A":
            raise ConfigError(f"unsupported family {self.family!r}")
        if not 1 <= self.rank <= 4:
            raise ConfigError(f"rank must be in 1..4, got {self.rank}")
        if self.replicas <= 0:
            raise ConfigError(f"replicas must be positive, got {self.replicas}")
        if self.steps <= 0:
            raise ConfigError(f"steps must be positive, got {self.steps}")
        if self.dt <= 0.0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.tail_tol <= 0.0:
            raise ConfigError(f"tail_tol must be positive, got {self.tail_tol}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        grid = tuple(float(t) for t in self.t_grid)
        if any(t <= 0.0 for t in grid) or any(
            b <= a for a, b in zip(grid, grid[1:])
        ):
            raise ConfigError("t_grid must be positive and strictly increasing")
        object.__setattr__(self, "t_grid", grid)


# experiment-specific scales; anything not listed inherits the dataclass default
_DEFAULTS: dict[str, dict] = {
    "identities": dict(replicas=50),
    "radial": dict(replicas=20_000, steps=2000),
    "endorbit": dict(replicas=100_000),
    "kirillov": dict(replicas=100_000),
    "endpoint": dict(replicas=1_000_000, steps=2000),
    "condorbit": dict(replicas=200_000, steps=800, t_grid=(0.5,)),
    "martingale": dict(replicas=20_000, t_grid=(0.25, 0.5, 1.0)),
    "phiQ": dict(replicas=20_000, dt=1e-3, t_grid=(0.5,)),
    "entrance": dict(replicas=20_000, steps=4000),
    "gauge": dict(replicas=16, steps=1024),
    "intertwine": dict(replicas=10_000, steps=512),
    "main": dict(replicas=10_000, steps=2000, dt=1e-3, t_grid=(0.5, 1.0, 2.0)),
}


def default_config(experiment: str, **overrides) -> ExperimentConfig:
    """Standard configuration of a named experiment, with optional overrides."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(
            f"unknown experiment {experiment!r}; known: {', '.join(EXPERIMENTS)}"
        )
    base = dict(_DEFAULTS.get(experiment, {}))
    base.update(overrides)
    return ExperimentConfig(experiment=experiment, **base)


def with_overrides(cfg: ExperimentConfig, **overrides) -> ExperimentConfig:
    """Copy of cfg with the given fields replaced (re-validated)."""
    return dataclasses.replace(cfg, **overrides)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _coerce(name: str, raw: str):
    if name == "t_grid":
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        try:
            return tuple(float(p) for p in parts)
        except ValueError:
            raise ConfigError(f"bad t_grid entry in {raw!r}") from None
    target = _FIELDS[name].type
    try:
        if target == "int":
            return int(raw)
        if target == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {name}") from None


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse a key = value config file into an ExperimentConfig."""
    values: dict = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        values[key] = _coerce(key, raw)
    if "experiment" not in values:
        raise ConfigError(f"{path}: missing required key 'experiment'")
    experiment = values.pop("experiment")
    return default_config(experiment, **values)
