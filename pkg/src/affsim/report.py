"""Check results, experiment reports, and deterministic CSV/JSON output.

Reruns with identical config and seed produce byte-identical CSV files and
an identical JSON report apart from the timestamp and wall_seconds fields.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import UsageError

REPORT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class CheckResult:
    """One named pass/fail check with its measured statistic."""

    name: str
    statistic: float
    tolerance: float
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ExperimentReport:
    experiment: str
    anchor: str
    config: dict
    checks: tuple[CheckResult, ...]
    wall_seconds: float
    samples: dict
    files: tuple[str, ...]
    timestamp: str

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def utc_stamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def summarize_sample(arr: np.ndarray) -> dict:
    """Count and moment summary of one sample array, for the report."""
    arr = np.asarray(arr, dtype=float)
    flat = arr.reshape(arr.shape[0], -1) if arr.ndim > 1 else arr[:, None]
    return {
        "count": int(flat.shape[0]),
        "mean": [float(f"{v:.12g}") for v in flat.mean(axis=0)],
        "std": [float(f"{v:.12g}") for v in flat.std(axis=0, ddof=1)],
        "min": [float(f"{v:.12g}") for v in flat.min(axis=0)],
        "max": [float(f"{v:.12g}") for v in flat.max(axis=0)],
    }


def write_samples_csv(path: str | Path, columns: list[str], rows: np.ndarray) -> None:
    """Write a sample table; the header row names each column with its unit.

    Column labels look like "z_end[alcove]".  Values are %.17g so the file
    is a lossless, byte-deterministic function of the data.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[1] != len(columns):
        raise UsageError(
            f"{len(columns)} column labels for data of width {rows.shape[1]}"
        )
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(f"{v:.17g}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def report_to_dict(report: ExperimentReport) -> dict:
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "experiment": report.experiment,
        "anchor": report.anchor,
        "config": report.config,
        "checks": [dataclasses.asdict(c) for c in report.checks],
        "passed": report.passed,
        "wall_seconds": round(report.wall_seconds, 3),
        "samples": report.samples,
        "files": list(report.files),
        "timestamp": report.timestamp,
    }


def write_report_json(report: ExperimentReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n"
    )


def format_report_text(report: ExperimentReport) -> str:
    """Human-readable one-line-per-check rendering for the CLI."""
    lines = [
        f"experiment {report.experiment} (anchor: {report.anchor})",
        f"  seed={report.config.get('seed')} rank={report.config.get('rank')} "
        f"replicas={report.config.get('replicas')}",
    ]
    for c in report.checks:
        mark = "PASS" if c.passed else "FAIL"
        detail = f"  [{c.detail}]" if c.detail else ""
        lines.append(
            f"  {mark} {c.name}: stat={c.statistic:.6g} tol={c.tolerance:.6g}{detail}"
        )
    lines.append(
        f"  => {'all checks passed' if report.passed else 'CHECKS FAILED'} "
        f"in {report.wall_seconds:.1f}s"
    )
    return "\n".join(lines)
