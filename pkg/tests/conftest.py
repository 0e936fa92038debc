"""
Shared fixtures: the default layout, short seeded tasks and synthetic gaze
"""
import pytest

from src.core.layout import layout_manager
from src.simulation.dronesim import DroneSimulator
from src.simulation.gazegen import GazeGenerator
from src.utils.models import BehaviorParams, SimulationConfig, TimeGrid


@pytest.fixture(scope="session")
def layout():
    return layout_manager.default_layout()


@pytest.fixture(scope="session")
def short_sim_cfg():
    """Four 15 s intervals, every one critical"""
    return SimulationConfig(task_length_s=60.0, n_intervals=4, p_critical=1.0, p_highlight=0.5)


@pytest.fixture(scope="session")
def simulator(short_sim_cfg):
    return DroneSimulator(short_sim_cfg)


@pytest.fixture(scope="session")
def short_trace(simulator):
    return simulator.simulate_task(seed=3, task_id=0)


@pytest.fixture(scope="session")
def grid():
    return TimeGrid()


@pytest.fixture(scope="session")
def behavior():
    return BehaviorParams()


@pytest.fixture(scope="session")
def generator(behavior):
    return GazeGenerator(behavior)


@pytest.fixture(scope="session")
def short_gaze(generator, short_trace, layout, behavior):
    return generator.generate_gaze(short_trace, layout, behavior, seed=3, participant_id=0)
