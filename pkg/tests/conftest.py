"""Shared pytest fixtures and test utilities."""

import dataclasses
import json
from pathlib import Path

import numpy as np
import pytest

from ewris.config import RisPanelConfig, ScenarioConfig


@pytest.fixture
def default_scenario() -> ScenarioConfig:
    """Return the reference scenario (50x50 RIS, two BS antennas)."""
    return ScenarioConfig()


@pytest.fixture
def small_scenario() -> ScenarioConfig:
    """Return the reference geometry with a 20x20 RIS for fast tests."""
    return ScenarioConfig(panels=(RisPanelConfig(rows=20, cols=20),))


@pytest.fixture
def single_antenna_scenario(small_scenario: ScenarioConfig) -> ScenarioConfig:
    """Return the small scenario served by one BS antenna."""
    bs = dataclasses.replace(small_scenario.base_station, n_antennas=1)
    return dataclasses.replace(small_scenario, base_station=bs)


@pytest.fixture
def rng() -> np.random.Generator:
    """Return a seeded generator."""
    return np.random.default_rng(1234)


@pytest.fixture
def scenario_file(tmp_path: Path) -> Path:
    """Write a small scenario JSON and return its path."""
    path = tmp_path / "scenario.json"
    path.write_text(
        json.dumps(
            {
                "transmit_power_dbm": 30.0,
                "panels": [{"rows": 16, "cols": 16}],
                "base_station": {"n_antennas": 1},
            }
        ),
        encoding="utf-8",
    )
    return path


@pytest.fixture
def sweep_file(tmp_path: Path) -> Path:
    """Write a two-point transmit-power sweep and return its path."""
    path = tmp_path / "sweep.json"
    path.write_text(
        json.dumps(
            {
                "parameter": "transmit_power_dBm",
                "values": [20, 30],
                "strategies": ["ew", "random"],
                "trials": 2,
                "seed": 3,
            }
        ),
        encoding="utf-8",
    )
    return path
