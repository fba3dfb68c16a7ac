import logging
from dataclasses import dataclass, field, replace

import numpy as np

from cata.auction.auction import reward_matrix, run_cata
from cata.data.model_variables import AuctionConfig
from cata.data.world import World
from cata.exceptions import OracleSizeError, ParameterError
from cata.utils import derive_seed
from cata.utils.geometry import in_cone_mask, unit_rows
from cata.utils.rewards import collision_flags, shaped_bid
from cata.utils.stigmergy import AssignmentSet

logger = logging.getLogger(__name__)

BOUND = 0.5


@dataclass
class ObjectiveReport:
    """Optimal collision-aware objective next to CATA's value on the same instance."""

    optimal_value: float
    optimal_assignment: AssignmentSet
    cata_value: float
    cata_sequential_value: float
    cata_assignment: AssignmentSet
    safety_distance: float

    @property
    def ratio(self) -> float:
        if self.optimal_value <= 0:
            return 1.0
        return self.cata_value / self.optimal_value


@dataclass
class BoundReport:
    instances: int
    min_ratio: float
    mean_ratio: float
    violations: list = field(default_factory=list)  # (instance seed, n, ratio)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "instances": self.instances,
            "min_ratio": self.min_ratio,
            "mean_ratio": self.mean_ratio,
            "violations": [
                {"seed": seed, "n": n, "ratio": ratio} for seed, n, ratio in self.violations
            ],
        }


def evaluate_objective(
    assignment: AssignmentSet,
    world: World,
    safety_distance: float,
    config: AuctionConfig = AuctionConfig(),
) -> float:
    """Joint value of an assignment: every pair's flag is checked against all other pairs."""
    pairs = assignment.pairs()
    if not pairs:
        return 0.0
    locations = world.task_locations
    positions = np.array([world.position(r) for r, _ in pairs])
    goals = np.array([locations[world.task_index[t]] for _, t in pairs])
    velocities = unit_rows(goals - positions)
    rewards = reward_matrix(world, config)
    total = 0.0
    for k, (robot_id, task_id) in enumerate(pairs):
        others = [j for j in range(len(pairs)) if j != k]
        flag = collision_flags(positions[k], goals[k : k + 1], positions[others], velocities[others], safety_distance)[0]
        base = float(rewards[world.robot_index[robot_id], world.task_index[task_id]])
        total += shaped_bid(base, int(flag))
    return total


def pair_conflicts(world: World, safety_distance: float) -> np.ndarray:
    """conflict[i, l, j, m]: flag between robot i on task l and robot j on task m.

    The flag is symmetric in the two pairs, so one table serves both sides.
    """
    positions = world.robot_positions
    locations = world.task_locations
    headings = unit_rows(locations[None, :, :] - positions[:, None, :])  # (R, T, 2)
    rel_pos = positions[None, :, :] - positions[:, None, :]  # (R_i, R_j, 2)
    rel_vel = headings[:, :, None, None, :] - headings[None, None, :, :, :]
    return in_cone_mask(rel_pos[:, None, :, None, :], rel_vel, safety_distance)


def brute_force_optimum(
    world: World,
    safety_distance: float,
    config: AuctionConfig = AuctionConfig(),
    max_size: int = 8,
    evaluator=evaluate_objective,
) -> ObjectiveReport:
    """Exact optimum of the collision-aware objective at a fixed D, plus CATA's value.

    Enumerates every injective partial robot -> task mapping. A sub-assignment
    holding a flagged pair is dominated by the same sub-assignment without it,
    so the search only extends with unflagged pairs, and branches whose best
    case (remaining robots' largest rewards) cannot beat the incumbent are cut.

    Raises:
        OracleSizeError: If min(N_R, N_T) exceeds ``max_size``.
    """
    size = min(world.n_robots, world.n_tasks)
    if size > max_size:
        raise OracleSizeError(
            f"exhaustive optimum limited to min(N_R, N_T) <= {max_size}, got {size}; use a smaller N"
        )
    n_robots, n_tasks = world.n_robots, world.n_tasks
    rewards = reward_matrix(world, config)
    conflict = pair_conflicts(world, safety_distance).tolist() if size else []
    reward_rows = rewards.tolist()
    best_case = rewards.max(axis=1) if n_tasks else np.zeros(n_robots)
    suffix = np.concatenate([np.cumsum(best_case[::-1])[::-1], [0.0]]).tolist()

    best_value = 0.0
    best_pairs: list = []

    def search(i: int, used: set, chosen: list, value: float) -> None:
        nonlocal best_value, best_pairs
        if value > best_value:
            best_value, best_pairs = value, list(chosen)
        if i == n_robots or len(chosen) == size or value + suffix[i] <= best_value:
            return
        for l in range(n_tasks):
            if l in used or any(conflict[i][l][j][m] for j, m in chosen):
                continue
            used.add(l)
            chosen.append((i, l))
            search(i + 1, used, chosen, value + reward_rows[i][l])
            chosen.pop()
            used.discard(l)
        search(i + 1, used, chosen, value)

    search(0, set(), [], 0.0)
    optimal = AssignmentSet((world.robot_ids[i], world.tasks[l].id) for i, l in best_pairs)

    fixed = replace(config, safety_distance_initial=safety_distance, safety_distance_min=safety_distance)
    cata = run_cata(world, fixed)
    return ObjectiveReport(
        optimal_value=evaluate_objective(optimal, world, safety_distance, config),
        optimal_assignment=optimal,
        cata_value=evaluator(cata.assignments, world, safety_distance, config),
        cata_sequential_value=cata.objective_value,
        cata_assignment=cata.assignments,
        safety_distance=safety_distance,
    )


def verify_bound(
    count: int,
    n_range: tuple = (2, 7),
    seed: int = 0,
    safety_distance: float = 1.0,
    config: AuctionConfig = AuctionConfig(),
    evaluator=evaluate_objective,
    max_size: int = 8,
) -> BoundReport:
    """Checks that CATA reaches at least half the optimum on ``count`` random instances.

    Args:
        count (int): Number of instances.
        n_range (tuple): Inclusive (min, max) for N = N_R = N_T.
        seed (int): Master seed; instance k uses a seed derived from (seed, k).
        safety_distance (float): Fixed D for both CATA and the oracle.
        config (AuctionConfig): Reward parameters.
        evaluator (callable): Joint objective evaluator applied to CATA's assignment.
        max_size (int): Enumeration guard.

    Returns:
        BoundReport: Ratios and any violating instance seeds.

    Raises:
        ParameterError: If the n range is empty or starts below 1.
        OracleSizeError: If the n range exceeds ``max_size``.
    """
    from cata.scenarios.scenarios import random_world

    n_min, n_max = int(n_range[0]), int(n_range[1])
    if not 1 <= n_min <= n_max:
        raise ParameterError(f"n range must satisfy 1 <= n_min <= n_max, got ({n_min}, {n_max})")
    if count < 0:
        raise ParameterError(f"count must be >= 0, got {count}")
    if n_max > max_size:
        raise OracleSizeError(f"n range upper end {n_max} exceeds the oracle guard {max_size}")
    ratios = []
    violations = []
    for k in range(count):
        instance_seed = derive_seed(seed, k)
        rng = np.random.default_rng(instance_seed)
        n = int(rng.integers(n_min, n_max + 1))
        world = random_world(n, n, instance_seed, discount=config.discount, inherent_value=config.inherent_value)
        report = brute_force_optimum(world, safety_distance, config, max_size, evaluator)
        ratios.append(report.ratio)
        if report.ratio < BOUND:
            logger.warning("bound violated: seed=%d n=%d ratio=%.6f", instance_seed, n, report.ratio)
            violations.append((instance_seed, n, report.ratio))
    return BoundReport(
        instances=count,
        min_ratio=float(min(ratios)) if ratios else 1.0,
        mean_ratio=float(np.mean(ratios)) if ratios else 1.0,
        violations=violations,
    )
