import numpy as np
import pytest

from cata.data.model_variables import AuctionConfig, SimConfig
from cata.data.world import Task, World
from cata.utils.geometry import Vec2


def make_world(robots, tasks, value=100.0, discount=0.95) -> World:
    """World with robots and tasks numbered in list order."""
    return World(
        list(range(len(robots))),
        np.array(robots, dtype=float).reshape(-1, 2),
        [Task(l, Vec2(float(x), float(y)), value, discount) for l, (x, y) in enumerate(tasks)],
    )


@pytest.fixture
def crossing_world() -> World:
    # Robot 1 wins task 0 first; robot 0's nearest remaining task (1) crosses
    # robot 1's path, task 2 does not.
    return make_world([(0.0, 0.0), (4.0, 0.0)], [(3.0, 3.0), (6.0, 5.0), (-5.5, 6.0)])


@pytest.fixture
def swap_world() -> World:
    return make_world([(-5.0, 0.0), (5.0, 0.0)], [(5.0, 0.0), (-5.0, 0.0)])


@pytest.fixture
def auction_config() -> AuctionConfig:
    return AuctionConfig()


@pytest.fixture
def sim_config() -> SimConfig:
    # unit zone, sensing and gain keep the hand-worked geometry in the sim tests simple
    return SimConfig(safety_zone_radius=1.0, sensing_radius=2.0, repulsion_gain=1.0)
