"""Command line entry: bresselab <config> [--out DIR] [--threads N].

Exit codes: 0 when every check passes (or the configuration is outside
the covered regimes, which is a finding, not a failure), 1 when a check
fails, 2 for usage and configuration errors.
"""

from __future__ import annotations

import argparse
import os
import sys


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bresselab",
        description="Run one experiment described by a flat key = value config file.",
    )
    parser.add_argument("config", help="path to the config file")
    parser.add_argument("--out", default="out", help="output directory (default: ./out)")
    parser.add_argument("--threads", type=int, default=None, help="BLAS/OpenMP thread cap")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0,) else 0

    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be >= 1", file=sys.stderr)
            return 2
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)

    # imported after the thread caps so BLAS pools size themselves accordingly
    from .configio import ConfigError, parse_config
    from .experiments import run_experiment

    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        result = run_experiment(cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FloatingPointError as exc:
        print(f"run aborted: {exc}", file=sys.stderr)
        return 1

    for line in result.report_lines:
        print(line)
    return 0 if result.status in ("pass", "uncovered") else 1


if __name__ == "__main__":
    raise SystemExit(main())
