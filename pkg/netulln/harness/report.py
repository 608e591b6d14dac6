"""Terminal tables for a finished run."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from pathlib import Path

from netulln.console import print_line, print_table
from netulln.harness.audit import Check, Status, count_by_status
from netulln.harness.manifest import RunManifest, read_manifest
from netulln.harness.outputs import DIAGNOSE_FILE, SUMMARY_FILE, read_csv

logger = logging.getLogger(__name__)

_CHECK_HEADERS = ("section", "check", "n", "s", "status", "detail")
_SHELL_ROWS_SHOWN = 12


def check_rows(checks: Sequence[Check]) -> list[tuple[object, ...]]:
    return [
        (
            check.section,
            check.name,
            "" if check.n is None else check.n,
            "" if check.s is None else check.s,
            check.status.label,
            check.detail,
        )
        for check in checks
    ]


def print_checks(title: str, checks: Sequence[Check]) -> None:
    if not checks:
        return
    print_table(title, _CHECK_HEADERS, check_rows(checks))
    counts = count_by_status(checks)
    print_line(
        "  " + ", ".join(f"{counts[status]} {status.past_tense}" for status in Status)
    )


def show_report(out_dir: Path) -> RunManifest:
    """Print the checks and summary tables stored in ``out_dir``."""
    manifest = read_manifest(out_dir)
    checks = [record.to_check() for record in manifest.checks]
    print_line(
        f"{manifest.experiment} run, netulln {manifest.netulln_version}, "
        f"seed {manifest.config.get('seed')}, exit code {manifest.exit_code}"
    )

    files = {record.file for record in manifest.outputs}
    if DIAGNOSE_FILE in files:
        _, rows = read_csv(out_dir / DIAGNOSE_FILE)
        shell_rows = [row for row in rows if row[0] == "shells"]
        if shell_rows:
            shown = shell_rows[:_SHELL_ROWS_SHOWN]
            print_table(
                "Average shell sizes",
                ("n", "s", "average", "largest"),
                [
                    (row[2], row[3], row[5], row[6].removeprefix("max "))
                    for row in shown
                ],
            )
            hidden = len(shell_rows) - len(shown)
            if hidden:
                print_line(f"  ... {hidden} more row(s) in {DIAGNOSE_FILE}")
    print_checks("Checks", checks)

    if SUMMARY_FILE in files:
        headers, rows = read_csv(out_dir / SUMMARY_FILE)
        print_table("Summary", headers, rows)
    for record in manifest.identification:
        logger.debug("Identification audit: %s", record)
    return manifest
