from __future__ import annotations

import sys
from pathlib import Path

import pytest


REPO_ROOT = Path(__file__).resolve().parents[1]
SCRIPTS_DIR = REPO_ROOT / "scripts"
FIXTURES_DIR = SCRIPTS_DIR / "fixtures"

if str(SCRIPTS_DIR) not in sys.path:
    sys.path.insert(0, str(SCRIPTS_DIR))


@pytest.fixture(scope="session")
def canonical_scenario_path() -> Path:
    return FIXTURES_DIR / "canonical_scenario.txt"


@pytest.fixture(scope="session")
def canonical_scenario(canonical_scenario_path):
    from scenario_parser import parse_scenario

    return parse_scenario(canonical_scenario_path)


@pytest.fixture(scope="session")
def trained_maps():
    """Property maps trained once with the default config and seed 42."""
    from fable_config import merge_defaults
    from feature_maps import train_channel_maps

    return train_channel_maps(merge_defaults()["som"], 42)


@pytest.fixture(scope="session")
def canonical_runs(canonical_scenario, trained_maps):
    from fable_runner import run_scenario

    return [
        run_scenario(canonical_scenario, k, maps=trained_maps, seed=canonical_scenario.seed)
        for k in range(len(canonical_scenario.orders))
    ]


@pytest.fixture
def make_cylinder():
    from fable_models import ObjectSpec

    def _make(obj_id="cyl", color="red", weight_g=420.0, radius_cm=3.18, height_cm=11.5):
        return ObjectSpec(
            id=obj_id, color=color, shape="cylinder",
            dims={"radius_cm": radius_cm, "height_cm": height_cm}, weight_g=weight_g,
        )

    return _make
