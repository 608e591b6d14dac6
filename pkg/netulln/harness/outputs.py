"""CSV tables with fixed headers and the digests recorded in the manifest."""

from __future__ import annotations

import csv
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from blake3 import blake3

MANIFEST_FILE = "manifest.json"
DIAGNOSE_FILE = "diagnose.csv"
RESULTS_FILE = "results.csv"
SUMMARY_FILE = "summary.csv"
PLOT_DATA_FILE = "plot_data.csv"

DIAGNOSE_HEADERS = ("section", "check", "n", "s", "status", "value", "detail")
RESULTS_HEADERS = ("experiment", "variant", "n", "replication", "value")
SUMMARY_HEADERS = (
    "experiment",
    "variant",
    "n",
    "median",
    "q75",
    "mean",
    "se",
    "bias",
    "rmse",
    "net_size",
    "delta",
)
PLOT_DATA_HEADERS = ("series", "x", "y")


@dataclass(frozen=True)
class SummaryRow:
    experiment: str
    variant: str
    n: int
    median: float | None = None
    q75: float | None = None
    mean: float | None = None
    se: float | None = None
    bias: float | None = None
    rmse: float | None = None
    net_size: int | None = None
    delta: float | None = None

    def cells(self) -> tuple[Any, ...]:
        return (
            self.experiment,
            self.variant,
            self.n,
            self.median,
            self.q75,
            self.mean,
            self.se,
            self.bias,
            self.rmse,
            self.net_size,
            self.delta,
        )


@dataclass
class Tables:
    """Rows collected across experiments before they are written."""

    results: list[tuple[Any, ...]] = field(default_factory=list)
    summary: list[SummaryRow] = field(default_factory=list)
    plot_data: list[tuple[Any, ...]] = field(default_factory=list)

    def add_results(
        self, experiment: str, variant: str, n: int, values: Iterable[float]
    ) -> None:
        self.results.extend(
            (experiment, variant, n, replication, float(value))
            for replication, value in enumerate(values)
        )

    def add_series(self, series: str, points: Iterable[tuple[float, float]]) -> None:
        self.plot_data.extend((series, float(x), float(y)) for x, y in points)

    def extend(self, other: Tables) -> None:
        self.results.extend(other.results)
        self.summary.extend(other.summary)
        self.plot_data.extend(other.plot_data)


def format_cell(value: Any) -> str:
    """``repr`` for floats so a rerun reproduces the file byte for byte."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(float(value))
    return str(value)


def write_csv(
    path: Path, headers: Sequence[str], rows: Iterable[Sequence[Any]]
) -> int:
    count = 0
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(headers)
        for row in rows:
            if len(row) != len(headers):
                raise ValueError(
                    f"{path.name}: row has {len(row)} cells, expected {len(headers)}"
                )
            writer.writerow([format_cell(cell) for cell in row])
            count += 1
    return count


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    if not path.is_file():
        raise ValueError(f"{path}: file not found")
    with path.open("r", newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: empty CSV file")
    return rows[0], rows[1:]


def calculate_blake3(file_path: Path) -> str:
    hash_state = blake3()
    with open(file_path, "rb") as file_handle:
        for chunk in iter(lambda: file_handle.read(65536), b""):
            hash_state.update(chunk)
    return hash_state.hexdigest()
