"""Run manifest: resolved config, seed keys, checks, digests and versions."""

from __future__ import annotations

import platform
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Literal

import networkx
import numpy
import scipy
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from netulln.harness.audit import Check, Status
from netulln.harness.outputs import MANIFEST_FILE, calculate_blake3
from netulln.rng import stage_code

StatusLabel = Literal["PASS", "FAIL", "WAIVED"]


class SeedRecord(BaseModel):
    """Stream key prefix ``(entropy, stage_code)``; counters follow per draw."""

    model_config = ConfigDict(extra="forbid")

    stage: str
    entropy: int
    stage_code: int
    counters: str


class CheckRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    section: str
    name: str
    status: StatusLabel
    detail: str = ""
    n: int | None = None
    value: float | None = None
    s: int | None = None

    def to_check(self) -> Check:
        return Check(
            section=self.section,
            name=self.name,
            status=Status.parse(self.status),
            detail=self.detail,
            n=self.n,
            value=self.value,
            s=self.s,
        )


class OutputRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    file: str
    blake3: str
    rows: int


class RunManifest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    netulln_version: str
    experiment: str
    strict: bool
    exit_code: int
    config: dict[str, Any]
    seeds: list[SeedRecord] = Field(default_factory=list)
    checks: list[CheckRecord] = Field(default_factory=list)
    identification: list[dict[str, Any]] = Field(default_factory=list)
    versions: dict[str, str] = Field(default_factory=dict)
    timings: dict[str, float] = Field(default_factory=dict)
    outputs: list[OutputRecord] = Field(default_factory=list)


def get_version() -> str:
    try:
        return version("netulln")
    except PackageNotFoundError:
        return "unknown"


def package_versions() -> dict[str, str]:
    return {
        "netulln": get_version(),
        "python": platform.python_version(),
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "networkx": networkx.__version__,
    }


def seed_records(master_seed: int, stages: dict[str, str]) -> list[SeedRecord]:
    """One record per stage name, mapping to the counters its draws append."""
    return [
        SeedRecord(
            stage=stage,
            entropy=master_seed,
            stage_code=stage_code(stage),
            counters=counters,
        )
        for stage, counters in stages.items()
    ]


def output_record(path: Path, rows: int) -> OutputRecord:
    return OutputRecord(file=path.name, blake3=calculate_blake3(path), rows=rows)


def write_manifest(out_dir: Path, manifest: RunManifest) -> Path:
    path = out_dir / MANIFEST_FILE
    path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def read_manifest(out_dir: Path) -> RunManifest:
    path = out_dir / MANIFEST_FILE
    if not path.is_file():
        raise ValueError(f"{path}: manifest not found; run an experiment first")
    try:
        return RunManifest.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as error:
        raise ValueError(
            f"{path}: invalid manifest ({error.error_count()} error(s))"
        ) from error
