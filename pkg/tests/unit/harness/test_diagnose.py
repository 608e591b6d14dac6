"""Tests for the assumption diagnostics."""

from __future__ import annotations

import pytest

from netulln.harness.audit import Status
from netulln.harness.diagnose import effective_decay, family_roles, run_diagnose
from netulln.process import theoretical_decay
from tests.support.runs import small_config as build_config


def _named(report, name):
    return [check for check in report.checks if check.name == name]


def test_sparse_cycle_passes_every_diagnostic(small_config):
    report = run_diagnose(small_config)
    assert report.failed() == set()
    assert [c.n for c in _named(report, "sparsity_window")] == [20, 40]
    assert [c.status for c in _named(report, "denseness_decay")] == [Status.PASS] * 2
    assert _named(report, "shock_averaging")[0].status is Status.PASS
    assert {c.name for c in report.checks} >= {
        "decay_profile",
        "decay_power_bound",
        "family_bounds:family",
        "family_bounds:m_family",
        "family_bounds:gmm_family",
        "psi_bound:family",
        "delta_net_covering",
        "delta_net_cardinality",
        "covariance_decay",
    }


def test_net_cardinality_grows_like_the_dimension(small_config):
    report = run_diagnose(small_config)
    covering = _named(report, "delta_net_covering")
    assert len(covering) == 3
    assert all(check.value <= 0.2 for check in covering)
    (cardinality,) = _named(report, "delta_net_cardinality")
    assert cardinality.value == pytest.approx(1.0, abs=0.05)


def test_shell_rows_describe_the_cycle(small_config):
    report = run_diagnose(small_config)
    first = [row for row in report.shells if row.n == 20]
    assert [row.s for row in first] == list(range(7))
    assert first[0].average == 1.0
    assert all(row.average == 2.0 for row in first[1:])
    assert report.csv_rows()[0] == ("shells", "shell_size", 20, 0, "", 1.0, "max 1")


def test_non_monotone_override_fails_the_profile_check(tmp_path):
    config = build_config(
        tmp_path,
        decay_override={"form": "exact_table", "table": [1.0, 0.2, 0.5], "tail": 0.0},
    )
    report = run_diagnose(config)
    assert "decay_profile" in report.failed()
    assert "increases from s=1" in _named(report, "decay_profile")[0].detail
    assert effective_decay(config) is config.decay_override


def test_undecaying_shock_is_waived(tmp_path):
    process = {
        "radius": 1,
        "weights": [1.0, 0.5],
        "shock_loading": 0.5,
        "shock_decay": 0.0,
    }
    report = run_diagnose(build_config(tmp_path, process=process))
    assert "shock_averaging" in report.waived()


def test_covariance_within_the_dependence_radius_is_waived(tmp_path):
    config = build_config(tmp_path, diagnose={"covariance_distances": [2, 3]})
    report = run_diagnose(config)
    checks = _named(report, "covariance_decay")
    assert [(c.s, c.status) for c in checks][0] == (2, Status.WAIVED)
    assert "2r=2" in checks[0].detail


def test_single_fine_delta_waives_the_cardinality_fit(tmp_path):
    config = build_config(tmp_path, diagnose={"net_deltas": [0.5, 1.5]})
    (check,) = _named(run_diagnose(config), "delta_net_cardinality")
    assert check.status is Status.WAIVED


def test_family_roles_follow_the_estimators(tmp_path):
    config = build_config(tmp_path, estimation={"estimators": ["m"]})
    assert set(family_roles(config)) == {"family", "m_family"}
    assert effective_decay(config) == theoretical_decay(config.process)
