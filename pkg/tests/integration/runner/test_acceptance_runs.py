"""Acceptance-scale full-suite run on the packaged sparse-cycle defaults."""

from __future__ import annotations

import pytest

from netulln.config import config_from_mapping
from netulln.harness.audit import EXIT_OK, Status
from netulln.harness.outputs import SUMMARY_FILE, read_csv
from netulln.harness.runner import RunOutcome, run

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def default_suite(tmp_path_factory) -> RunOutcome:
    out_dir = tmp_path_factory.mktemp("default-suite")
    config = config_from_mapping({"output_dir": str(out_dir)}, source="<defaults>")
    return run(config, "full-suite")


def _statuses(outcome: RunOutcome, name: str) -> list[Status]:
    statuses = [check.status for check in outcome.checks if check.name == name]
    assert statuses, f"no {name} check was recorded"
    return statuses


def test_default_suite_exits_cleanly(default_suite):
    assert default_suite.exit_code == EXIT_OK


def test_unconditional_ulln_medians_shrink(default_suite):
    assert _statuses(default_suite, "ulln_unconditional") == [Status.PASS]


def test_ma1_maximal_growth_stays_under_the_cap(default_suite):
    assert _statuses(default_suite, "maximal_growth") == [Status.PASS]


def test_block_moment_ratio_is_bounded_across_block_sizes(default_suite):
    assert _statuses(default_suite, "block_moment") == [Status.PASS]
    _, rows = read_csv(default_suite.out_dir / SUMMARY_FILE)
    variants = {row[1] for row in rows if row[0] == "block_moment"}
    assert variants == {"b=4", "b=8", "b=16", "b=32"}
    assert {row[2] for row in rows if row[0] == "block_moment"} == {"4096"}


def test_rademacher_monte_carlo_matches_enumeration(default_suite):
    assert _statuses(default_suite, "rademacher_exact") == [Status.PASS] * 3


@pytest.mark.parametrize(
    "name", ["estimate_m", "estimate_gmm-identity", "estimate_gmm-inverse_variance"]
)
def test_estimator_rmse_shrinks(default_suite, name):
    assert _statuses(default_suite, name) == [Status.PASS]


def test_gmm_weightings_agree(default_suite):
    assert _statuses(default_suite, "gmm_weighting_agreement") == [Status.PASS]
