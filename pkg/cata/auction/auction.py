import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from cata.data.model_variables import AuctionConfig
from cata.data.world import World, max_pairwise_spacing
from cata.exceptions import AuctionTimeout
from cata.utils.geometry import segments_intersect, unit_rows
from cata.utils.rewards import collision_flags, discounted_rewards
from cata.utils.stigmergy import AssignmentSet, BidTuple, StigmergyStore, round_key

logger = logging.getLogger(__name__)

ALGORITHMS = ("cata", "cbaa", "greedy", "random", "optimal")


@dataclass
class AuctionResult:
    """Outcome of one assignment run.

    Attributes:
        algorithm (str): Which procedure produced it.
        assignments (AssignmentSet): Final robot <-> task pairs.
        rounds_used (int): Auction rounds, stalled rounds included.
        objective_value (float): Sum of the winning bids.
        horizon_trace (list[float]): Safety distance D used in each round.
        winners (list[BidTuple]): Winning tuples in the order they were committed.
        stalled (bool): True when the auction ended on a stall at D_min.
    """

    algorithm: str
    assignments: AssignmentSet = field(default_factory=AssignmentSet)
    rounds_used: int = 0
    objective_value: float = 0.0
    horizon_trace: list = field(default_factory=list)
    winners: list = field(default_factory=list)
    stalled: bool = False

    @property
    def final_safety_distance(self) -> float | None:
        return self.horizon_trace[-1] if self.horizon_trace else None


@dataclass
class RoundOutcome:
    winner: BidTuple | None
    bids: list
    assignments: AssignmentSet

    @property
    def stalled(self) -> bool:
        return self.winner is None


def initial_safety_distance(world: World, config: AuctionConfig) -> float:
    """D_0: configured value, else the widest robot spacing, never below D_min."""
    if config.safety_distance_initial is not None:
        return float(config.safety_distance_initial)
    return max(config.safety_distance_min, max_pairwise_spacing(world.robot_positions))


def _neighbor_motion(world: World, assignments: AssignmentSet, exclude: int):
    """Positions and unit intended velocities of assigned robots other than ``exclude``."""
    locations = world.task_locations
    rows = [(r, t) for r, t in assignments.pairs() if r != exclude]
    if not rows:
        return np.zeros((0, 2)), np.zeros((0, 2))
    positions = np.array([world.position(r) for r, _ in rows])
    goals = np.array([locations[world.task_index[t]] for _, t in rows])
    return positions, unit_rows(goals - positions)


def open_task_bids(
    robot_id: int,
    world: World,
    assignments: AssignmentSet,
    safety_distance: float,
    config: AuctionConfig,
    collision_aware: bool = True,
):
    """Shaped bids of one robot on every unassigned task.

    Returns:
        tuple[list[int], np.ndarray]: Open task ids (ascending) and their bids.
    """
    open_idx = [k for k, t in enumerate(world.tasks) if not assignments.has_task(t.id)]
    if not open_idx:
        return [], np.zeros(0)
    robot_pos = world.position(robot_id)
    locations = world.task_locations[open_idx]
    bids = discounted_rewards(
        robot_pos,
        locations,
        world.task_values[open_idx],
        world.task_discounts[open_idx],
        config.speed,
    )
    if collision_aware:
        positions, velocities = _neighbor_motion(world, assignments, robot_id)
        flags = collision_flags(robot_pos, locations, positions, velocities, safety_distance)
        bids = np.where(flags == 1, 0.0, bids)
    return [world.tasks[k].id for k in open_idx], bids


def local_highest_bid(
    robot_id: int,
    world: World,
    assignments: AssignmentSet,
    safety_distance: float,
    config: AuctionConfig = AuctionConfig(),
    collision_aware: bool = True,
) -> BidTuple:
    """Finds the local highest bid on one robot.

    Ties between tasks go to the lower task id. A robot with no positive bid
    returns a zero tuple without a task.
    """
    task_ids, bids = open_task_bids(robot_id, world, assignments, safety_distance, config, collision_aware)
    if len(bids) == 0:
        return BidTuple(robot_id, 0.0, None)
    best = int(np.argmax(bids))
    if bids[best] <= 0:
        return BidTuple(robot_id, 0.0, None)
    return BidTuple(robot_id, float(bids[best]), task_ids[best])


def cata_round(
    world: World,
    store: StigmergyStore,
    safety_distance: float,
    config: AuctionConfig = AuctionConfig(),
    round_index: int = 0,
    collision_aware: bool = True,
) -> RoundOutcome:
    """One auction + consensus round.

    Every unassigned robot reads A from the store, puts its local highest bid
    under the round's global-bid key, and the surviving tuple is committed
    when it is positive. A zero global bid means the round stalled.
    """
    assignments = store.read_assignments()
    key = round_key(round_index)
    bids = []
    for robot_id in world.robot_ids:
        if assignments.has_robot(robot_id):
            continue
        bid = local_highest_bid(robot_id, world, assignments, safety_distance, config, collision_aware)
        bids.append(bid)
        store.put_bid(bid, key)
    winner = store.global_bid(key)
    if winner is None or winner.bid_value <= 0:
        return RoundOutcome(None, bids, assignments)
    return RoundOutcome(winner, bids, store.commit_winner(winner))


def _run_receding_horizon(world: World, config: AuctionConfig, algorithm: str, next_round) -> AuctionResult:
    """Shared round loop with the receding collision horizon.

    ``next_round(assignments, D, round_index)`` returns the round winner (or
    None on a stall) and the updated assignment set.
    """
    result = AuctionResult(algorithm)
    target = min(world.n_robots, world.n_tasks)
    limit = config.round_limit(world.n_tasks)
    distance = initial_safety_distance(world, config)
    logger.debug("%s auction: %d robots, %d tasks, D0=%.4g", algorithm, world.n_robots, world.n_tasks, distance)
    while len(result.assignments) < target:
        if result.rounds_used >= limit:
            raise AuctionTimeout(f"{algorithm} auction exceeded {limit} rounds", result)
        result.horizon_trace.append(distance)
        result.rounds_used += 1
        winner, assignments = next_round(result.assignments, distance, result.rounds_used - 1)
        if winner is None:
            if distance <= config.safety_distance_min:
                result.stalled = True
                logger.debug("%s auction stalled at D_min with %d/%d assigned", algorithm, len(assignments), target)
                break
            distance = max(config.safety_distance_min, config.horizon_decay * distance)
            continue
        result.assignments = assignments
        result.winners.append(winner)
        result.objective_value += winner.bid_value
    return result


def _run_stigmergy_auction(world: World, config: AuctionConfig, algorithm: str, collision_aware: bool) -> AuctionResult:
    store = StigmergyStore()

    def next_round(assignments, distance, round_index):
        outcome = cata_round(world, store, distance, config, round_index, collision_aware)
        return outcome.winner, outcome.assignments

    return _run_receding_horizon(world, config, algorithm, next_round)


def run_cata(world: World, config: AuctionConfig = AuctionConfig()) -> AuctionResult:
    """Collision-aware auction with the receding collision horizon.

    Raises:
        AuctionTimeout: If ``max_rounds`` is exhausted; carries the partial result.
    """
    return _run_stigmergy_auction(world, config, "cata", collision_aware=True)


def run_cbaa(world: World, config: AuctionConfig = AuctionConfig()) -> AuctionResult:
    """Consensus-based auction baseline: time-discounted rewards only."""
    return _run_stigmergy_auction(world, config, "cbaa", collision_aware=False)


def run_greedy_centralized(world: World, config: AuctionConfig = AuctionConfig()) -> AuctionResult:
    """Centralized greedy: picks the globally highest shaped bid given prior assignments."""

    def next_round(assignments, distance, round_index):
        best = None
        for robot_id in world.robot_ids:
            if assignments.has_robot(robot_id):
                continue
            task_ids, bids = open_task_bids(robot_id, world, assignments, distance, config)
            for task_id, bid in zip(task_ids, bids):
                if bid <= 0:
                    continue
                candidate = BidTuple(robot_id, float(bid), task_id)
                if best is None or candidate.bid_value > best.bid_value:
                    best = candidate
        if best is None:
            return None, assignments
        updated = assignments.copy()
        updated.add(best.robot_id, best.task_id)
        return best, updated

    return _run_receding_horizon(world, config, "greedy", next_round)


def reward_matrix(world: World, config: AuctionConfig = AuctionConfig()) -> np.ndarray:
    """Unshaped rewards b_il, robots in rows and tasks in columns."""
    return np.array(
        [
            discounted_rewards(p, world.task_locations, world.task_values, world.task_discounts, config.speed)
            for p in world.robot_positions
        ]
    ).reshape(world.n_robots, world.n_tasks)


def _fixed_result(world: World, config: AuctionConfig, algorithm: str, pairs) -> AuctionResult:
    rewards = reward_matrix(world, config)
    result = AuctionResult(algorithm)
    for robot_id, task_id in sorted(pairs):
        bid = float(rewards[world.robot_index[robot_id], world.task_index[task_id]])
        result.assignments.add(robot_id, task_id)
        result.winners.append(BidTuple(robot_id, bid, task_id))
        result.objective_value += bid
    return result


def run_random(world: World, config: AuctionConfig = AuctionConfig(), seed: int = 0) -> AuctionResult:
    """Random injective assignment of size min(N_R, N_T)."""
    rng = np.random.default_rng(seed)
    n = min(world.n_robots, world.n_tasks)
    robots = rng.permutation(world.robot_ids)[:n]
    tasks = rng.permutation(world.task_ids)[:n]
    return _fixed_result(world, config, "random", zip(robots.tolist(), tasks.tolist()))


def run_classical_optimal(world: World, config: AuctionConfig = AuctionConfig()) -> AuctionResult:
    """Optimal assignment of the classical objective (no collision terms)."""
    if world.n_robots == 0 or world.n_tasks == 0:
        return AuctionResult("optimal")
    rows, cols = linear_sum_assignment(reward_matrix(world, config), maximize=True)
    pairs = [(world.robot_ids[r], world.tasks[c].id) for r, c in zip(rows, cols)]
    return _fixed_result(world, config, "optimal", pairs)


def run_algorithm(name: str, world: World, config: AuctionConfig = AuctionConfig(), seed: int = 0) -> AuctionResult:
    """Dispatches on the algorithm name used by the CLI and batch runner."""
    if name == "cata":
        return run_cata(world, config)
    if name == "cbaa":
        return run_cbaa(world, config)
    if name == "greedy":
        return run_greedy_centralized(world, config)
    if name == "random":
        return run_random(world, config, seed)
    if name == "optimal":
        return run_classical_optimal(world, config)
    raise ValueError(f"unknown algorithm {name!r}, expected one of {ALGORITHMS}")


def count_path_crossings(world: World, assignments: AssignmentSet) -> int:
    """Number of unordered assigned pairs whose straight robot->task paths intersect."""
    segments = [(world.position(r), world.task(t).location.as_array()) for r, t in assignments.pairs()]
    crossings = 0
    for a in range(len(segments)):
        for b in range(a + 1, len(segments)):
            if segments_intersect(*segments[a], *segments[b]):
                crossings += 1
    return crossings
