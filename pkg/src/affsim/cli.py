"""Command line entry point.

Two subcommands: `check identities` runs the deterministic identity suite,
`run <experiment>` runs any registered experiment.  Exit codes: 0 all
checks passed, 1 a check failed, 2 usage or configuration error, 3 a
numerical, precision or sampling failure.

AFFSIM_THREADS is honored by exporting the standard BLAS thread caps
before numpy is first imported, so this module keeps its imports lazy.
"""

from __future__ import annotations

import argparse
import os
import sys


def _cap_threads() -> None:
    raw = os.environ.get("AFFSIM_THREADS")
    if not raw:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, raw)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="affsim", description="simulation experiments for affine radial laws")
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="run a named deterministic suite")
    check.add_argument("suite", choices=["identities"], help="suite name")
    _common_flags(check)

    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("experiment", help="experiment name (see config.EXPERIMENTS)")
    _common_flags(run)
    return parser


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="key = value configuration file")
    p.add_argument("--seed", type=int, help="base seed (the run also uses seed+1)")
    p.add_argument("--rank", type=int, help="root-system rank override")
    p.add_argument("--replicas", type=int, help="replica count override")
    p.add_argument("--out", metavar="DIR", help="output directory (default results)")
    p.add_argument("--json", action="store_true", help="print the JSON report to stdout")


def main(argv=None) -> int:
    _cap_threads()
    args = _build_parser().parse_args(argv)

    from .config import default_config, load_config, with_overrides
    from .errors import (
        AffsimError,
        ConfigError,
        DomainError,
        UsageError,
    )

    experiment = args.suite if args.command == "check" else args.experiment
    try:
        if args.config:
            cfg = load_config(args.config)
            if cfg.experiment != experiment:
                raise ConfigError(
                    f"config file is for {cfg.experiment!r}, command asked for {experiment!r}"
                )
        else:
            cfg = default_config(experiment)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.rank is not None:
            overrides["rank"] = args.rank
        if args.replicas is not None:
            overrides["replicas"] = args.replicas
        if args.out is not None:
            overrides["out_dir"] = args.out
        if overrides:
            cfg = with_overrides(cfg, **overrides)
    except (ConfigError, UsageError, DomainError) as exc:
        print(f"affsim: {exc}", file=sys.stderr)
        return 2

    from .harness import run_experiment
    from .report import format_report_text, report_to_dict

    try:
        report = run_experiment(cfg)
    except (ConfigError, UsageError, DomainError) as exc:
        print(f"affsim: {exc}", file=sys.stderr)
        return 2
    except AffsimError as exc:
        print(f"affsim: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3

    if args.json:
        import json

        print(json.dumps(report_to_dict(report), indent=2, sort_keys=True))
    else:
        print(format_report_text(report))
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
