"""Tests for the run manifest model and its file."""

from __future__ import annotations

import json

import pytest

from netulln.harness.audit import Check, Status
from netulln.harness.manifest import (
    CheckRecord,
    RunManifest,
    output_record,
    package_versions,
    read_manifest,
    seed_records,
    write_manifest,
)
from netulln.harness.outputs import MANIFEST_FILE, calculate_blake3
from netulln.rng import stage_code


def _manifest(**changes) -> RunManifest:
    fields = {
        "netulln_version": "0.1.0",
        "experiment": "diagnose",
        "strict": False,
        "exit_code": 0,
        "config": {"seed": 7},
    }
    return RunManifest(**{**fields, **changes})


def test_seed_records_carry_the_stage_code():
    records = seed_records(7, {"ulln": "n, replication", "net-probe": ""})
    assert [record.stage for record in records] == ["ulln", "net-probe"]
    assert records[0].entropy == 7
    assert records[0].stage_code == stage_code("ulln")
    assert records[1].counters == ""


def test_check_record_rebuilds_the_check():
    check = Check("diagnose", "sparsity_window", Status.WAIVED, "note", n=400, s=None)
    record = CheckRecord(**check.as_dict())
    assert record.to_check() == check


def test_manifest_round_trips_through_its_file(tmp_path):
    data = tmp_path / "diagnose.csv"
    data.write_text("section,check\n", encoding="utf-8")
    manifest = _manifest(
        seeds=seed_records(7, {"diagnose": "n"}),
        checks=[CheckRecord(**Check("d", "x", Status.PASS, value=1.5).as_dict())],
        outputs=[output_record(data, 0)],
        timings={"diagnose": 0.25},
    )
    path = write_manifest(tmp_path, manifest)
    assert path.name == MANIFEST_FILE
    assert read_manifest(tmp_path) == manifest
    assert manifest.outputs[0].blake3 == calculate_blake3(data)


def test_read_manifest_errors(tmp_path):
    with pytest.raises(ValueError, match="manifest not found"):
        read_manifest(tmp_path)
    payload = _manifest().model_dump()
    payload["unexpected"] = 1
    (tmp_path / MANIFEST_FILE).write_text(json.dumps(payload), encoding="utf-8")
    with pytest.raises(ValueError, match="invalid manifest"):
        read_manifest(tmp_path)


def test_package_versions_name_the_numeric_stack():
    versions = package_versions()
    assert {"netulln", "python", "numpy", "scipy", "networkx"} <= set(versions)
    assert all(versions.values())
