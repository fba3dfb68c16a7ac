import itertools

import numpy as np
import pytest

from cata.auction import run_cata
from cata.data.model_variables import AuctionConfig
from cata.exceptions import OracleSizeError, ParameterError
from cata.oracle import brute_force_optimum, evaluate_objective, pair_conflicts, verify_bound
from cata.scenarios import random_world
from cata.utils.stigmergy import AssignmentSet

from .conftest import make_world


def _enumerated_optimum(world, distance):
    """Every sub-assignment, no pruning."""
    best = 0.0
    for k in range(min(world.n_robots, world.n_tasks) + 1):
        for robots in itertools.combinations(world.robot_ids, k):
            for tasks in itertools.permutations(world.task_ids, k):
                best = max(best, evaluate_objective(AssignmentSet(zip(robots, tasks)), world, distance))
    return best


def test_empty_assignment_is_worth_nothing(crossing_world):
    assert evaluate_objective(AssignmentSet(), crossing_world, 1.0) == 0.0


def test_single_pair_is_worth_its_reward():
    world = make_world([(0.0, 0.0), (1.0, 0.0)], [(0.0, 4.0)])
    assert evaluate_objective(AssignmentSet([(0, 0)]), world, 5.0) == pytest.approx(100.0 * 0.95**4)


def test_head_on_pairs_zero_each_other():
    world = make_world([(0.0, 0.0), (4.0, 0.0)], [(10.0, 0.0), (-6.0, 0.0)])
    assert evaluate_objective(AssignmentSet([(0, 0), (1, 1)]), world, 1.0) == 0.0


def test_single_robot_optimum():
    world = make_world([(2.0, 2.0)], [(5.0, 6.0)])
    report = brute_force_optimum(world, 1.0)
    assert report.optimal_value == pytest.approx(100.0 * 0.95**5)
    assert report.optimal_assignment.pairs() == [(0, 0)]
    assert report.ratio == pytest.approx(1.0)


def test_symmetric_pairs_optimum():
    world = make_world([(0.0, 0.0), (10.0, 0.0)], [(0.0, 5.0), (10.0, 5.0)])
    report = brute_force_optimum(world, 1.0)
    assert report.optimal_value == pytest.approx(2 * 100.0 * 0.95**5)
    assert report.optimal_assignment.pairs() == [(0, 0), (1, 1)]


@pytest.mark.parametrize("seed", range(12))
def test_pruned_search_matches_full_enumeration(seed):
    rng = np.random.default_rng(seed)
    world = random_world(int(rng.integers(1, 5)), int(rng.integers(1, 5)), seed=seed)
    distance = float(rng.uniform(0.5, 3.0))
    report = brute_force_optimum(world, distance)
    assert report.optimal_value == pytest.approx(_enumerated_optimum(world, distance), rel=1e-12)


def test_conflict_table_is_symmetric_and_matches_joint_flags():
    world = random_world(5, 6, seed=17)
    conflict = pair_conflicts(world, 1.5)
    assert conflict.shape == (5, 6, 5, 6)
    np.testing.assert_array_equal(conflict, conflict.transpose(2, 3, 0, 1))
    for i, l, j, m in [(0, 1, 2, 3), (1, 0, 4, 5), (3, 2, 0, 4)]:
        pair = AssignmentSet([(i, l), (j, m)])
        base = evaluate_objective(AssignmentSet([(i, l)]), world, 1.5) + evaluate_objective(AssignmentSet([(j, m)]), world, 1.5)
        joint = evaluate_objective(pair, world, 1.5)
        assert joint == pytest.approx(0.0 if conflict[i, l, j, m] else base)


def test_cata_joint_value_equals_sequential_at_fixed_distance():
    for seed in range(20):
        report = brute_force_optimum(random_world(5, 5, seed=seed), 1.0)
        assert report.cata_value == pytest.approx(report.cata_sequential_value)
        assert 0.0 <= report.ratio <= 1.0 + 1e-9


def test_cata_value_matches_horizon_free_run():
    world = random_world(4, 4, seed=3)
    report = brute_force_optimum(world, 1.0)
    fixed = run_cata(world, AuctionConfig(safety_distance_initial=1.0, safety_distance_min=1.0))
    assert report.cata_assignment == fixed.assignments


def test_size_guard():
    world = random_world(9, 9, seed=0)
    with pytest.raises(OracleSizeError):
        brute_force_optimum(world, 1.0)
    with pytest.raises(OracleSizeError):
        verify_bound(1, (2, 9))


@pytest.mark.parametrize("n_range", [(5, 3), (0, 2)])
def test_empty_n_range_rejected(n_range):
    with pytest.raises(ParameterError):
        verify_bound(1, n_range)


def test_bound_holds_on_random_instances():
    report = verify_bound(30, (2, 6), seed=0)
    assert report.ok
    assert report.instances == 30
    assert 0.5 <= report.min_ratio <= report.mean_ratio <= 1.0 + 1e-9


def test_single_pair_instances_have_ratio_one():
    report = verify_bound(10, (1, 1), seed=4)
    assert report.min_ratio == pytest.approx(1.0)
    assert report.mean_ratio == pytest.approx(1.0)


def test_corrupted_evaluator_is_caught():
    report = verify_bound(5, (2, 4), seed=1, evaluator=lambda *args: 0.0)
    assert not report.ok
    assert len(report.violations) == 5
    assert report.to_dict()["violations"][0]["ratio"] == 0.0


def test_bound_report_is_deterministic():
    assert verify_bound(8, (2, 5), seed=9).to_dict() == verify_bound(8, (2, 5), seed=9).to_dict()


@pytest.mark.slow
def test_bound_holds_on_500_instances():
    report = verify_bound(500, (2, 7), seed=0)
    assert report.violations == []
    assert report.min_ratio >= 0.5
