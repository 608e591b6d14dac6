"""Tests for run-config loading and validation."""

from __future__ import annotations

import json
from pathlib import Path

import pytest
import yaml

from netulln.config import (
    AcceptanceThresholds,
    DiagnoseOptions,
    EstimationOptions,
    MaximalOptions,
    RunConfig,
    UllnOptions,
    config_from_mapping,
    default_mapping,
    load_config,
)
from netulln.errors import ConfigError
from tests.support.runs import write_config


def test_defaults_describe_the_sparse_cycle():
    config = load_config()
    assert config.experiment == "full-suite"
    assert config.network.kind == "cycle"
    assert config.process.weight_table == (1.0, 0.5)
    assert config.assumptions.p == 5
    assert config.assumptions.d == 1
    assert config.estimation.m_family.params == {"clip": 16.0}
    assert config.estimation.refine_tol == 1e-6
    assert config.ulln.oracle_se_ceiling == 0.01


def test_default_resource_matches_dataclass_defaults():
    config = load_config()
    assert config.diagnose == DiagnoseOptions()
    assert config.ulln == UllnOptions()
    assert config.maximal == MaximalOptions()
    assert config.estimation == EstimationOptions()
    assert config.acceptance == AcceptanceThresholds()


def test_sections_merge_key_by_key(tmp_path):
    path = write_config(tmp_path / "run.yaml", {"ulln": {"replications": 7}})
    config = load_config(path)
    assert config.ulln.replications == 7
    assert config.ulln.n_grid == (100, 400, 1600, 6400)
    assert config.source == str(path)


def test_whole_sections_are_replaced(tmp_path):
    path = write_config(
        tmp_path / "run.yaml", {"network": {"kind": "random_geometric", "radius": 0.2}}
    )
    config = load_config(path)
    assert config.network.kind == "random_geometric"
    assert dict(config.network.params) == {"radius": 0.2}


def test_p_of_two_is_rejected_with_its_line(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("seed: 1\nassumptions:\n  p: 2\n", encoding="utf-8")
    with pytest.raises(ConfigError) as excinfo:
        load_config(path)
    message = str(excinfo.value)
    assert f"{path}:3" in message
    assert "'assumptions.p' must be an integer > 2" in message


def test_unknown_keys_are_listed(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("ulln:\n  replication: 3\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="unknown 'ulln' key\\(s\\): replication"):
        load_config(path)


def test_unknown_top_level_key():
    with pytest.raises(ConfigError, match="Allowed keys"):
        config_from_mapping({"sede": 3})


@pytest.mark.parametrize(
    ("mapping", "message"),
    [
        ({"seed": -1}, "'seed' must be >= 0"),
        ({"threads": 0}, "'threads' must be >= 1"),
        ({"experiment": "sweep"}, "'experiment' must be one of"),
        ({"ulln": {"oracle_draws": 100, "replications": 50}}, "10x"),
        ({"ulln": {"n_grid": [400, 100]}}, "strictly increasing"),
        ({"maximal": {"n_grid": [16, 32, 64]}}, "at least 4"),
        ({"maximal": {"rademacher_n": [8, 24]}}, "<= 20"),
        ({"estimation": {"theta0": [0.0, 1.0]}}, "one entry per parameter"),
        ({"estimation": {"refine_tol": 0}}, "must be positive"),
        ({"network": {"kind": "torus"}}, "unknown network kind"),
        ({"process": {"radius": 1, "weights": [1.0]}}, "weights"),
        ({"family": {"name": "huber"}}, "unknown family"),
        ({"acceptance": {"covariance_pass_rate": 1.5}}, "<= 1"),
        (
            {"decay_override": {"form": "power_bound", "amplitude": 1.0}},
            "decay_override.p",
        ),
    ],
)
def test_invalid_values_raise_config_errors(mapping, message):
    with pytest.raises(ConfigError, match=message):
        config_from_mapping(mapping)


def test_decay_override_table():
    config = config_from_mapping(
        {"decay_override": {"form": "exact_table", "table": [1.0, 0.5], "tail": 0.0}}
    )
    assert config.decay_override.table == (1.0, 0.5)
    assert config.decay_override.support == 1


def test_parameter_space_sets_the_dimension():
    config = config_from_mapping(
        {
            "parameter_space": {"bounds": [[-1.0, 1.0], [0.0, 2.0]]},
            "estimation": {"theta0": [0.0, 1.0]},
        }
    )
    assert config.assumptions.d == 2
    assert config.parameter_space.dimension == 2


def test_with_overrides_validates_cli_values():
    config = load_config()
    changed = config.with_overrides(
        seed=3, threads=4, output_dir=Path("x"), strict=True
    )
    assert (changed.seed, changed.threads, changed.strict) == (3, 4, True)
    assert changed.output_dir == Path("x")
    with pytest.raises(ConfigError, match="--threads"):
        config.with_overrides(threads=0)
    with pytest.raises(ConfigError, match="--seed"):
        config.with_overrides(seed=-5)


def test_to_mapping_round_trips_through_yaml(tmp_path):
    config = config_from_mapping(
        {
            "seed": 99,
            "decay_override": {"form": "power_bound", "amplitude": 2.0, "p": 3},
        }
    )
    path = write_config(tmp_path / "again.yaml", config.to_mapping())
    assert load_config(path) == config


def test_manifest_is_read_through_its_config(tmp_path):
    config = config_from_mapping({"seed": 123})
    manifest = {"netulln_version": "0.1.0", "config": config.to_mapping()}
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    loaded = load_config(path)
    assert isinstance(loaded, RunConfig)
    assert loaded == config
    assert loaded.estimation.refine_tol == 1e-6


def test_invalid_yaml_and_missing_file(tmp_path):
    broken = tmp_path / "broken.yaml"
    broken.write_text("ulln: [1, 2\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="invalid YAML"):
        load_config(broken)
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.yaml")


def test_default_mapping_is_a_fresh_copy():
    first = default_mapping()
    first["ulln"]["replications"] = 1
    assert default_mapping()["ulln"]["replications"] == 200
    assert yaml.safe_dump(default_mapping())
