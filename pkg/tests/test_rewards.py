import numpy as np
import pytest

from cata.data.world import Task
from cata.exceptions import ParameterError
from cata.utils.geometry import Vec2, unit_rows
from cata.utils.rewards import (
    collision_flag,
    collision_flags,
    discounted_rewards,
    shaped_bid,
    time_discounted_reward,
)
from cata.utils.stigmergy import AssignmentSet


def test_undiscounted_reward_is_inherent_value():
    task = Task(0, Vec2(30.0, -4.0), inherent_value=10.0, discount=1.0)
    assert time_discounted_reward(Vec2(0, 0), task, 1.0) == pytest.approx(10.0)


def test_reward_at_task_location():
    task = Task(0, Vec2(1.0, 1.0), inherent_value=7.0, discount=0.3)
    assert time_discounted_reward(Vec2(1, 1), task, 2.0) == pytest.approx(7.0)


def test_reward_direct_evaluation():
    task = Task(0, Vec2(2.0, 0.0), inherent_value=10.0, discount=0.9)
    assert time_discounted_reward(Vec2(0, 0), task, 1.0) == pytest.approx(8.1)


@pytest.mark.parametrize("speed", [0.0, -1.0])
def test_reward_rejects_non_positive_speed(speed):
    with pytest.raises(ParameterError):
        time_discounted_reward(Vec2(0, 0), Task(0, Vec2(1, 0)), speed)


def test_reward_strictly_decreasing_in_distance():
    locations = np.column_stack([np.linspace(0, 50, 30), np.zeros(30)])
    rewards = discounted_rewards((0.0, 0.0), locations, np.full(30, 100.0), np.full(30, 0.95), 1.0)
    assert np.all(np.diff(rewards) < 0)
    flat = discounted_rewards((0.0, 0.0), locations, np.full(30, 100.0), np.ones(30), 1.0)
    np.testing.assert_allclose(flat, 100.0)


def test_vectorized_rewards_match_scalar():
    task = Task(3, Vec2(-3.0, 7.5), inherent_value=40.0, discount=0.8)
    vectorized = discounted_rewards((1.0, 2.0), [[-3.0, 7.5]], [40.0], [0.8], 1.5)
    assert vectorized[0] == pytest.approx(time_discounted_reward(Vec2(1, 2), task, 1.5))


def _flag(positions, robot_id, task, pairs, tasks, distance=1.0):
    robot_positions = {k: Vec2.of(p) for k, p in enumerate(positions)}
    return collision_flag(robot_id, task, robot_positions, AssignmentSet(pairs), tasks, distance)


def test_flag_without_assigned_neighbors():
    tasks = {0: Task(0, Vec2(5, 0)), 1: Task(1, Vec2(-2, 0))}
    assert _flag([(0, 0), (3, 0)], 0, tasks[0], [], tasks) == 0


def test_flag_head_on():
    tasks = {0: Task(0, Vec2(5, 0)), 1: Task(1, Vec2(-2, 0))}
    assert _flag([(0, 0), (3, 0)], 0, tasks[0], [(1, 1)], tasks) == 1


def test_flag_parallel_motion():
    tasks = {0: Task(0, Vec2(5, 0)), 1: Task(1, Vec2(5, 3))}
    assert _flag([(0, 0), (0, 3)], 0, tasks[0], [(1, 1)], tasks) == 0


def test_robot_on_its_task_is_static_obstacle():
    # Neighbor 1 sits on its task; robot 0 heads straight through it.
    tasks = {0: Task(0, Vec2(6, 0)), 1: Task(1, Vec2(3, 0))}
    assert _flag([(0, 0), (3, 0)], 0, tasks[0], [(1, 1)], tasks) == 1


@pytest.mark.parametrize("base, flag, expected", [(8.1, 0, 8.1), (8.1, 1, 0.0), (0.0, 1, 0.0)])
def test_shaped_bid(base, flag, expected):
    assert shaped_bid(base, flag) == expected


def test_shaped_bid_rejects_negative_base():
    with pytest.raises(ParameterError):
        shaped_bid(-0.1, 0)


def test_shaped_bid_rejects_non_binary_flag():
    with pytest.raises(ParameterError):
        shaped_bid(1.0, 2)


def test_shaped_bid_non_increasing_in_flag():
    for base in np.linspace(0, 100, 11):
        assert shaped_bid(base, 1) <= shaped_bid(base, 0)


def _random_case(rng, n=6):
    positions = rng.uniform(-5, 5, size=(n, 2))
    locations = rng.normal(0, 10, size=(n, 2))
    tasks = {l: Task(l, Vec2.of(locations[l])) for l in range(n)}
    return positions, locations, tasks


def test_vectorized_flags_match_scalar():
    rng = np.random.default_rng(11)
    for _ in range(200):
        positions, locations, tasks = _random_case(rng)
        pairs = [(1, 2), (3, 0), (4, 5)]
        neighbors = np.array([positions[r] for r, _ in pairs])
        headings = unit_rows(np.array([locations[t] for _, t in pairs]) - neighbors)
        open_tasks = [1, 3, 4]
        vectorized = collision_flags(positions[0], locations[open_tasks], neighbors, headings, 1.0)
        scalar = [_flag(positions, 0, tasks[l], pairs, tasks) for l in open_tasks]
        assert vectorized.tolist() == scalar


def _check_superset_monotone(cases, seed):
    rng = np.random.default_rng(seed)
    violations = 0
    for _ in range(cases):
        n = 6
        positions, locations, _ = _random_case(rng, n)
        robots = rng.permutation(n)
        tasks = rng.permutation(n)
        small = int(rng.integers(0, 3))
        large = int(rng.integers(small, 5))
        # robot robots[5] bids on task tasks[5]; neither is in either set
        pairs = list(zip(robots[:large].tolist(), tasks[:large].tolist()))
        bidder, task = int(robots[5]), int(tasks[5])
        distance = float(rng.uniform(0.2, 4.0))
        flags = []
        for subset in (pairs[:small], pairs):
            if subset:
                neighbors = np.array([positions[r] for r, _ in subset])
                headings = unit_rows(np.array([locations[t] for _, t in subset]) - neighbors)
            else:
                neighbors, headings = np.zeros((0, 2)), np.zeros((0, 2))
            flags.append(int(collision_flags(positions[bidder], locations[task : task + 1], neighbors, headings, distance)[0]))
        base = float(discounted_rewards(positions[bidder], locations[task : task + 1], [100.0], [0.95], 1.0)[0])
        if shaped_bid(base, flags[1]) > shaped_bid(base, flags[0]):
            violations += 1
    return violations


def test_bid_never_grows_with_assignment_set():
    assert _check_superset_monotone(500, seed=5) == 0


@pytest.mark.slow
def test_bid_never_grows_with_assignment_set_full():
    assert _check_superset_monotone(10_000, seed=6) == 0
