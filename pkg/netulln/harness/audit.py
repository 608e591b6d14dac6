"""Check outcomes (PASS/FAIL/WAIVED) and the exit-code rule built on them."""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


class Status(Enum):
    PASS = ("PASS", "passed")
    FAIL = ("FAIL", "failed")
    WAIVED = ("WAIVED", "waived")

    def __init__(self, label: str, past_tense: str) -> None:
        self.label = label
        self.past_tense = past_tense

    @classmethod
    def parse(cls, label: str) -> Status:
        for status in cls:
            if status.label == label:
                return status
        raise ValueError(f"unknown status '{label}'")

    @classmethod
    def of(cls, passed: bool) -> Status:
        return cls.PASS if passed else cls.FAIL


@dataclass(frozen=True)
class Check:
    """One assumption diagnostic or acceptance assertion."""

    section: str
    name: str
    status: Status
    detail: str = ""
    n: int | None = None
    value: float | None = None
    s: int | None = None

    def blocks(self, *, strict: bool) -> bool:
        if self.status is Status.FAIL:
            return True
        return strict and self.status is Status.WAIVED

    def as_dict(self) -> dict[str, Any]:
        value = self.value
        if value is not None and not math.isfinite(value):
            value = None
        return {
            "section": self.section,
            "name": self.name,
            "status": self.status.label,
            "detail": self.detail,
            "n": self.n,
            "value": value,
            "s": self.s,
        }


def exit_code(checks: Iterable[Check], *, strict: bool) -> int:
    blocked = any(check.blocks(strict=strict) for check in checks)
    return EXIT_FAILED if blocked else EXIT_OK


def waive_if(check: Check, reasons: list[str]) -> Check:
    """Downgrade a computed check to WAIVED when its assumptions did not hold."""
    if not reasons:
        return check
    reason = "; ".join(reasons)
    detail = f"waived: {reason}"
    if check.detail:
        detail = f"{check.detail}; {detail}"
    return replace(check, status=Status.WAIVED, detail=detail)


def count_by_status(checks: Iterable[Check]) -> dict[Status, int]:
    counts = {status: 0 for status in Status}
    for check in checks:
        counts[check.status] += 1
    return counts
