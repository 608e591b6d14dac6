"""Shared fixtures for netulln tests."""

from __future__ import annotations

import logging

import pytest

from netulln.config import RunConfig
from netulln.netgraph import Network, generate
from tests.support.runs import small_config as build_small_config


@pytest.fixture
def small_config(tmp_path) -> RunConfig:
    """Default sparse-cycle config with tiny grids, writing under tmp_path."""
    return build_small_config(tmp_path / "out")


@pytest.fixture
def cycle_100() -> Network:
    return generate("cycle", {"n": 100})


@pytest.fixture
def grid_5x5() -> Network:
    return generate("grid_lattice", {"n": 25})


@pytest.fixture(autouse=True)
def reset_root_logger():
    """Keep handlers installed by configure_logging from leaking across tests."""
    root = logging.getLogger()
    handlers = list(root.handlers)
    level = root.level
    yield
    for handler in list(root.handlers):
        if handler not in handlers:
            root.removeHandler(handler)
    root.setLevel(level)
