from pathlib import Path

import numpy as np
import pytest

from umwave.scenario import ScenarioConfig

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"


def small_scenario(m=2, n=4, grid=(-60.0, -35.0, 0.0, 25.0, 40.0), interest=(-35.0, 25.0), delays=(0, 1, 2), **kw):
    return ScenarioConfig.build(m, n, angle_grid=grid, interest_angles=interest, delay_set=delays, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def tiny():
    return small_scenario()


@pytest.fixture
def scenario_dir():
    return SCENARIOS
