import numpy as np
import pytest

from cata.auction import (
    count_path_crossings,
    cata_round,
    local_highest_bid,
    run_algorithm,
    run_cata,
    run_cbaa,
    run_classical_optimal,
    run_greedy_centralized,
    run_random,
)
from cata.data.model_variables import AuctionConfig
from cata.exceptions import AuctionTimeout
from cata.scenarios import RECEDING_DEMO, WorldSpec, generate_world, random_world
from cata.utils.stigmergy import AssignmentSet, BidTuple, StigmergyStore

from .conftest import make_world


def test_single_robot_single_task_bid(auction_config):
    world = make_world([(0.0, 0.0)], [(3.0, 4.0)])
    bid = local_highest_bid(0, world, AssignmentSet(), 1.0, auction_config)
    assert bid.task_id == 0
    assert bid.bid_value == pytest.approx(100.0 * 0.95**5)


def test_all_tasks_blocked_gives_zero_bid(auction_config):
    # Neighbor 1 holds a task and sits inside robot 0's safety disk.
    world = make_world([(0.0, 0.0), (0.5, 0.0)], [(0.5, 10.0), (5.0, 5.0), (-5.0, 5.0)])
    bid = local_highest_bid(0, world, AssignmentSet([(1, 0)]), 1.0, auction_config)
    assert bid == BidTuple(0, 0.0, None)


def test_bid_skips_task_whose_path_crosses(crossing_world, auction_config):
    # Task 1 is nearer than task 2, but heading there enters robot 1's cone.
    bid = local_highest_bid(0, crossing_world, AssignmentSet([(1, 0)]), 3.2, auction_config)
    assert bid.task_id == 2
    assert bid.bid_value == pytest.approx(100.0 * 0.95 ** np.hypot(5.5, 6.0))
    unaware = local_highest_bid(0, crossing_world, AssignmentSet([(1, 0)]), 3.2, auction_config, collision_aware=False)
    assert unaware.task_id == 1


def test_task_ties_go_to_lower_task_id(auction_config):
    world = make_world([(0.0, 0.0)], [(0.0, 5.0), (5.0, 0.0), (-5.0, 0.0)])
    assert local_highest_bid(0, world, AssignmentSet(), 1.0, auction_config).task_id == 0


def test_round_single_robot_completes(auction_config):
    world = make_world([(0.0, 0.0)], [(1.0, 1.0)])
    store = StigmergyStore()
    outcome = cata_round(world, store, 1.0, auction_config)
    assert not outcome.stalled
    assert store.read_assignments().pairs() == [(0, 0)]


def test_two_rounds_without_conflicts(auction_config):
    world = make_world([(0.0, 0.0), (10.0, 0.0)], [(0.0, 5.0), (10.0, 4.0)])
    store = StigmergyStore()
    first = cata_round(world, store, 1.0, auction_config, round_index=0)
    second = cata_round(world, store, 1.0, auction_config, round_index=1)
    assert first.winner.robot_id == 1
    assert second.winner.robot_id == 0
    assert first.winner.bid_value >= second.winner.bid_value
    assert store.read_assignments().pairs() == [(0, 0), (1, 1)]


def test_round_with_all_zero_bids_stalls(auction_config):
    world = make_world([(0.0, 0.0), (0.5, 0.0)], [(0.5, 10.0), (5.0, 5.0)])
    store = StigmergyStore()
    store.commit_winner(BidTuple(1, 50.0, 0))
    outcome = cata_round(world, store, 1.0, auction_config)
    assert outcome.stalled
    assert len(store.read_assignments()) == 1


def test_cata_receding_horizon_on_crossing_world(crossing_world, auction_config):
    result = run_cata(crossing_world, auction_config)
    assert result.assignments.pairs() == [(0, 2), (1, 0)]
    assert result.horizon_trace == pytest.approx([4.0, 4.0, 3.2])
    assert result.rounds_used == 3
    assert result.objective_value == pytest.approx(sum(w.bid_value for w in result.winners))


def test_cbaa_takes_crossing_pairs(crossing_world, auction_config):
    cbaa = run_cbaa(crossing_world, auction_config)
    cata = run_cata(crossing_world, auction_config)
    assert cbaa.assignments.pairs() == [(0, 1), (1, 0)]
    assert count_path_crossings(crossing_world, cbaa.assignments) == 1
    assert count_path_crossings(crossing_world, cata.assignments) == 0
    assert not cbaa.stalled and cbaa.rounds_used == 2


def test_cbaa_matches_cata_without_cones(auction_config):
    world = make_world([(0.0, 0.0), (10.0, 0.0), (20.0, 0.0)], [(0.0, 5.0), (10.0, 5.0), (20.0, 5.0)])
    fixed = AuctionConfig(safety_distance_initial=1.0, safety_distance_min=1.0)
    assert run_cbaa(world, fixed).assignments == run_cata(world, fixed).assignments


def test_single_robot_same_everywhere(auction_config):
    world = make_world([(1.0, 1.0)], [(4.0, 5.0), (-2.0, 0.0)])
    assert run_cata(world).assignments == run_cbaa(world).assignments == run_greedy_centralized(world).assignments


def test_fixed_horizon_never_decays():
    world = random_world(6, 6, seed=3)
    fixed = AuctionConfig(safety_distance_initial=1.0, safety_distance_min=1.0)
    result = run_cata(world, fixed)
    assert set(result.horizon_trace) == {1.0}


def test_greedy_on_empty_task_set():
    world = make_world([(0.0, 0.0), (1.0, 0.0)], [])
    result = run_greedy_centralized(world)
    assert len(result.assignments) == 0
    assert result.rounds_used == 0


def test_greedy_matches_cata_on_crossing_world(crossing_world):
    assert run_greedy_centralized(crossing_world).assignments == run_cata(crossing_world).assignments


def _check_greedy_equivalence(count, n_max, seed):
    rng = np.random.default_rng(seed)
    for k in range(count):
        n_robots = int(rng.integers(2, n_max + 1))
        n_tasks = int(rng.integers(2, n_max + 1))
        world = random_world(n_robots, n_tasks, seed=seed * 100_000 + k)
        cata = run_cata(world)
        greedy = run_greedy_centralized(world)
        assert greedy.assignments == cata.assignments
        assert greedy.horizon_trace == cata.horizon_trace


def test_greedy_equivalence():
    _check_greedy_equivalence(60, 8, seed=1)


@pytest.mark.slow
def test_greedy_equivalence_full():
    _check_greedy_equivalence(1000, 25, seed=2)


def test_winning_bids_non_increasing_at_fixed_distance():
    fixed = AuctionConfig(safety_distance_initial=1.0, safety_distance_min=1.0)
    for seed in range(30):
        result = run_cata(random_world(7, 7, seed=seed), fixed)
        bids = [w.bid_value for w in result.winners]
        assert all(a >= b for a, b in zip(bids, bids[1:]))


def _check_termination(count, seed):
    config = AuctionConfig(safety_distance_min=1e-6)
    rng = np.random.default_rng(seed)
    for k in range(count):
        n = int(rng.integers(1, 11))
        result = run_cata(random_world(n, n, seed=seed * 10_000 + k), config)
        assert len(result.assignments) == n
        trace = result.horizon_trace
        assert all(a >= b for a, b in zip(trace, trace[1:]))
        assert min(trace) >= config.safety_distance_min


def test_horizon_terminates_with_complete_assignment():
    _check_termination(40, seed=7)


@pytest.mark.slow
def test_horizon_terminates_with_complete_assignment_full():
    _check_termination(200, seed=8)


def test_one_winner_per_round():
    result = run_cata(random_world(8, 8, seed=21))
    stalls = sum(1 for a, b in zip(result.horizon_trace, result.horizon_trace[1:]) if b < a)
    assert result.rounds_used == len(result.winners) + stalls + int(result.stalled)


def test_timeout_carries_partial_result(crossing_world):
    with pytest.raises(AuctionTimeout) as excinfo:
        run_cata(crossing_world, AuctionConfig(max_rounds=2))
    partial = excinfo.value.partial
    assert partial.assignments.pairs() == [(1, 0)]
    assert partial.rounds_used == 2


def test_results_are_deterministic():
    world = random_world(9, 9, seed=4)
    first, second = run_cata(world), run_cata(world)
    assert first.assignments == second.assignments
    assert first.objective_value == second.objective_value
    assert first.horizon_trace == second.horizon_trace


def test_random_assignment_is_seeded_and_injective():
    world = random_world(5, 7, seed=9)
    first, second = run_random(world, seed=3), run_random(world, seed=3)
    assert first.assignments == second.assignments
    assert len(first.assignments) == 5
    assert len({t for _, t in first.assignments.pairs()}) == 5


def test_classical_optimum_dominates_greedy():
    for seed in range(20):
        world = random_world(6, 6, seed=seed)
        optimal = run_classical_optimal(world)
        assert len(optimal.assignments) == 6
        assert optimal.objective_value >= run_cbaa(world).objective_value - 1e-9
        assert optimal.objective_value >= run_random(world, seed=seed).objective_value - 1e-9


def test_run_algorithm_rejects_unknown_name(crossing_world):
    with pytest.raises(ValueError):
        run_algorithm("hungarian", crossing_world)


@pytest.mark.parametrize("name", ["cata", "cbaa", "greedy", "random", "optimal"])
def test_run_algorithm_dispatch(crossing_world, name):
    result = run_algorithm(name, crossing_world, seed=1)
    assert result.algorithm == name
    assert len(result.assignments) == 2


@pytest.mark.slow
def test_cbaa_crosses_more_paths_on_receding_demo():
    spec = WorldSpec(**RECEDING_DEMO)
    cbaa_crossings = cata_crossings = 0
    for seed in range(5):
        world = generate_world(spec, seed)
        cbaa_crossings += count_path_crossings(world, run_cbaa(world).assignments)
        cata_crossings += count_path_crossings(world, run_cata(world).assignments)
    assert cbaa_crossings > cata_crossings
