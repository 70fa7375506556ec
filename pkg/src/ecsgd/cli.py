"""Command line entry point: run experiments, audit inequalities, report.

Exit codes: 0 success, 1 an audit suite found violations, 2 invalid
configuration or arguments, 3 a run diverged.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .audits import AUDIT_SUITES, run_audit_suite
from .errors import ConfigurationError, DivergenceError, InvalidParameterError
from .harness import run_experiment
from .reporting import write_report

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ecsgd",
        description="Simulate error-feedback SGD variants and audit their convergence structure.",
    )
    parser.add_argument("--version", action="version", version=f"ecsgd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute the experiment matrix described by a config file")
    p_run.add_argument("config", help="path to an INI-style experiment config")
    p_run.add_argument(
        "--jobs",
        type=int,
        default=None,
        help="seed-parallel worker processes (default: one per core, capped by task count)",
    )

    p_audit = sub.add_parser("audit", help="run one Monte-Carlo audit suite")
    p_audit.add_argument("suite", choices=AUDIT_SUITES)
    p_audit.add_argument(
        "--trials",
        type=int,
        default=None,
        help="Monte-Carlo budget: trials per probe/point (compressor, noise) or seeds (lemma suites)",
    )
    p_audit.add_argument("--seed", type=int, default=0, help="base seed for the audit streams")

    p_report = sub.add_parser("report", help="render tables and figures for a finished run directory")
    p_report.add_argument("dir", help="experiment output directory (contains manifest.json)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            manifest = run_experiment(args.config, jobs=args.jobs)
            n_runs = len(manifest["points"]) * len(manifest["seeds"])
            print(
                f"wrote {n_runs} trajectories over {len(manifest['points'])} config point(s) "
                f"to {manifest['config']['run']['output']}"
            )
            return 0

        if args.command == "audit":
            if args.trials is not None and args.trials < 2:
                print("error: audit.trials: need at least 2 for standard errors", file=sys.stderr)
                return 2
            result = run_audit_suite(args.suite, budget=args.trials, seed=args.seed)
            json.dump(result, sys.stdout, indent=1, sort_keys=True)
            sys.stdout.write("\n")
            return 0 if result["passed"] else 1

        report = write_report(args.dir)
        for path in report["files"]:
            print(f"wrote {path}")
        return 0

    except (ConfigurationError, InvalidParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        where = f" in {exc.run_id}" if exc.run_id else ""
        print(f"run failed{where}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
