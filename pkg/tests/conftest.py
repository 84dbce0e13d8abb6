import numpy as np
import pytest

from dfrcwave import (
    RadarScene,
    SystemConfig,
    design_radar_only,
    rayleigh_channel,
)


@pytest.fixture
def small_system():
    """4x2 array, 8 subcarriers: big enough to be non-trivial, fast to solve."""
    return SystemConfig(n_tx=4, n_rx=2, n_sc=8, n_cp=3)


@pytest.fixture
def small_channel(small_system):
    return rayleigh_channel(small_system, 314, 0, 0, 0)


@pytest.fixture
def broadside_scene():
    return RadarScene(theta=0.0)


@pytest.fixture
def small_radar(small_system, broadside_scene):
    return design_radar_only(
        small_system.geometry, broadside_scene, small_system.total_power
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
