"""CLI command adapters for argparse handlers."""

from __future__ import annotations

import argparse
import logging
from pathlib import Path

from netulln.config import RunConfig, load_config
from netulln.console import (
    clickable_path,
    print_failure,
    print_next_steps,
    print_result,
)
from netulln.harness.audit import EXIT_OK, Status, count_by_status
from netulln.harness.report import print_checks, show_report
from netulln.harness.runner import run

logger = logging.getLogger(__name__)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    config = load_config(args.config)
    return config.with_overrides(
        experiment=args.command,
        seed=args.seed,
        output_dir=None if args.out is None else Path(args.out),
        threads=args.threads,
        strict=True if args.strict else None,
    )


def run_experiment(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    logger.debug("Resolved config from %s", config.source)
    outcome = run(config, args.command)

    title = "Diagnostics" if args.command == "diagnose" else "Checks"
    print_checks(title, outcome.checks)
    counts = count_by_status(outcome.checks)
    summary = (
        f"{len(outcome.outputs) + 1} file(s) in {clickable_path(outcome.out_dir)}; "
        f"{counts[Status.FAIL]} failed, {counts[Status.WAIVED]} waived"
    )
    if outcome.exit_code == EXIT_OK:
        print_result("finished", args.command, summary)
    else:
        print_failure("failed", args.command, summary)
        if counts[Status.WAIVED] and config.strict:
            print_next_steps(["Waived checks count as failures under --strict."])
    return outcome.exit_code


def run_report(args: argparse.Namespace) -> int:
    out_dir = Path(args.out) if args.out else load_config(args.config).output_dir
    show_report(out_dir)
    return EXIT_OK
