"""CLI verbs, overrides and exit codes."""

from __future__ import annotations

import json

import pytest

from netulln.cli import main
from netulln.harness.audit import EXIT_CONFIG, EXIT_FAILED
from netulln.harness.outputs import DIAGNOSE_FILE, MANIFEST_FILE
from tests.support.runs import DENSE_NETWORK, small_mapping, write_config


def _config_file(tmp_path, **sections):
    return str(write_config(tmp_path / "run.yaml", small_mapping(**sections)))


def test_diagnose_succeeds_and_applies_overrides(tmp_path, capsys):
    out = tmp_path / "out"
    main(
        [
            "diagnose",
            "--config",
            _config_file(tmp_path),
            "--out",
            str(out),
            "--seed",
            "17",
            "--threads",
            "2",
        ]
    )
    manifest = json.loads((out / MANIFEST_FILE).read_text(encoding="utf-8"))
    assert manifest["experiment"] == "diagnose"
    assert manifest["exit_code"] == 0
    assert manifest["config"]["seed"] == 17
    assert manifest["config"]["threads"] == 2
    assert (out / DIAGNOSE_FILE).is_file()
    assert "Finished diagnose" in capsys.readouterr().out


def test_invalid_config_exits_with_code_two(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text("assumptions:\n  p: 2\n", encoding="utf-8")
    with pytest.raises(SystemExit) as excinfo:
        main(["diagnose", "--config", str(path), "--out", str(tmp_path / "out")])
    assert excinfo.value.code == EXIT_CONFIG
    assert "must be an integer > 2" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_failed_diagnostic_exits_with_code_one(tmp_path):
    config = _config_file(tmp_path, network=DENSE_NETWORK, diagnose={"n_grid": [400]})
    with pytest.raises(SystemExit) as excinfo:
        main(["diagnose", "--config", config, "--out", str(tmp_path / "out")])
    assert excinfo.value.code == EXIT_FAILED


def test_strict_full_suite_on_a_dense_network_exits_with_code_one(tmp_path):
    config = _config_file(tmp_path, network=DENSE_NETWORK)
    out = tmp_path / "out"
    with pytest.raises(SystemExit) as excinfo:
        main(["full-suite", "--config", config, "--out", str(out), "--strict"])
    assert excinfo.value.code == EXIT_FAILED
    manifest = json.loads((out / MANIFEST_FILE).read_text(encoding="utf-8"))
    assert manifest["strict"] is True


def test_strict_turns_waived_checks_into_failures(tmp_path, capsys):
    config = _config_file(
        tmp_path,
        process={
            "radius": 1,
            "weights": [1.0, 0.5],
            "shock_loading": 0.5,
            "shock_decay": 0.0,
        },
        ulln={"modes": ["unconditional"]},
    )
    main(["verify-ulln", "--config", config, "--out", str(tmp_path / "lenient")])
    with pytest.raises(SystemExit) as excinfo:
        main(
            [
                "verify-ulln",
                "--config",
                config,
                "--out",
                str(tmp_path / "strict"),
                "--strict",
            ]
        )
    assert excinfo.value.code == EXIT_FAILED
    assert "count as failures under --strict" in capsys.readouterr().out


def test_report_reprints_a_finished_run(tmp_path, capsys):
    out = tmp_path / "out"
    main(["diagnose", "--config", _config_file(tmp_path), "--out", str(out)])
    capsys.readouterr()

    main(["report", "--out", str(out)])
    printed = capsys.readouterr().out
    assert "diagnose run" in printed
    assert "Average shell sizes" in printed
    assert "passed" in printed


def test_report_without_a_manifest_exits_with_code_one(tmp_path, capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["report", "--out", str(tmp_path)])
    assert excinfo.value.code == EXIT_FAILED
    assert "manifest not found" in capsys.readouterr().err


def test_bad_thread_count_is_an_argument_error(tmp_path):
    with pytest.raises(SystemExit) as excinfo:
        main(["diagnose", "--threads", "0", "--out", str(tmp_path)])
    assert excinfo.value.code == 2


def test_version_flag_prints_the_package_version(monkeypatch, capsys):
    monkeypatch.setattr("netulln.cli.get_version", lambda: "9.9.9")
    monkeypatch.setattr("sys.argv", ["netulln", "--version"])
    with pytest.raises(SystemExit) as excinfo:
        main()
    assert excinfo.value.code == 0
    assert capsys.readouterr().out.strip() == "netulln 9.9.9"
