"""Tests for check outcomes and the exit-code rule."""

from __future__ import annotations

import math

import pytest

from netulln.harness.audit import (
    EXIT_FAILED,
    EXIT_OK,
    Check,
    Status,
    count_by_status,
    exit_code,
    waive_if,
)


def _check(status: Status, **fields) -> Check:
    return Check("acceptance", "maximal_growth", status, **fields)


def test_status_labels_parse_back():
    for status in Status:
        assert Status.parse(status.label) is status
    assert Status.of(True) is Status.PASS
    assert Status.of(False) is Status.FAIL
    with pytest.raises(ValueError, match="unknown status 'SKIP'"):
        Status.parse("SKIP")


def test_waived_checks_block_only_under_strict():
    waived = _check(Status.WAIVED)
    assert not waived.blocks(strict=False)
    assert waived.blocks(strict=True)
    assert _check(Status.FAIL).blocks(strict=False)
    assert not _check(Status.PASS).blocks(strict=True)


def test_exit_code_rule():
    passing = [_check(Status.PASS), _check(Status.PASS)]
    assert exit_code(passing, strict=True) == EXIT_OK
    assert exit_code([*passing, _check(Status.WAIVED)], strict=False) == EXIT_OK
    assert exit_code([*passing, _check(Status.WAIVED)], strict=True) == EXIT_FAILED
    assert exit_code([*passing, _check(Status.FAIL)], strict=False) == EXIT_FAILED
    assert exit_code([], strict=True) == EXIT_OK


def test_waive_if_without_reasons_keeps_the_check():
    check = _check(Status.FAIL, detail="slope 3.1")
    assert waive_if(check, []) is check


def test_waive_if_appends_reasons():
    check = _check(Status.FAIL, detail="slope 3.1")
    waived = waive_if(check, ["n=256: window empty", "diagnose check x failed"])
    assert waived.status is Status.WAIVED
    assert waived.detail == (
        "slope 3.1; waived: n=256: window empty; diagnose check x failed"
    )
    assert waive_if(_check(Status.PASS), ["r"]).detail == "waived: r"


def test_as_dict_drops_non_finite_values():
    record = _check(Status.PASS, value=math.inf, n=64).as_dict()
    assert record["value"] is None
    assert record["status"] == "PASS"
    assert record["n"] == 64
    assert _check(Status.PASS, value=0.25).as_dict()["value"] == 0.25


def test_count_by_status_lists_every_status():
    counts = count_by_status([_check(Status.PASS), _check(Status.WAIVED)])
    assert counts == {Status.PASS: 1, Status.FAIL: 0, Status.WAIVED: 1}
