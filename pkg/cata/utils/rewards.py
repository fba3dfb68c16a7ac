# This script holds the local reward functions used for bidding: the
# time-discounted score and the collision-aware shaping of that score.
import math

import numpy as np

from cata.exceptions import ParameterError
from cata.utils.geometry import (
    Vec2,
    build_cone,
    in_cone_mask,
    relative_velocity_in_cone,
    unit_rows,
)


def time_discounted_reward(robot_pos, task, speed: float) -> float:
    """Time-discounted reward lambda_l ** tau * V_l.

    Args:
        robot_pos (Vec2): Current robot position.
        task (Task): The candidate task.
        speed (float): Travel speed (m/s) used to estimate tau.

    Returns:
        float: The reward before collision shaping.

    Raises:
        ParameterError: If speed is not positive.
    """
    if not speed > 0:
        raise ParameterError(f"speed must be > 0, got {speed}")
    tau = (task.location - Vec2.of(robot_pos)).norm() / speed
    return task.discount**tau * task.inherent_value


def discounted_rewards(robot_pos, task_locations, values, discounts, speed: float) -> np.ndarray:
    """Vectorized time_discounted_reward for one robot against every task."""
    if not speed > 0:
        raise ParameterError(f"speed must be > 0, got {speed}")
    offset = np.asarray(task_locations, dtype=float) - np.asarray(robot_pos, dtype=float)
    tau = np.hypot(offset[..., 0], offset[..., 1]) / speed
    return np.power(discounts, tau) * values


def intended_velocity(start, goal) -> Vec2:
    """Unit heading from ``start`` toward ``goal``; zero when already there."""
    return (Vec2.of(goal) - Vec2.of(start)).unit()


def collision_flag(
    robot_id,
    candidate_task,
    robot_positions: dict,
    assignments,
    tasks: dict,
    safety_distance: float,
) -> int:
    """Binary collision status W_il of robot i bidding for ``candidate_task``.

    Only neighbors that already hold an assignment are checked; each one is
    assumed to move at unit speed straight toward its assigned task.

    Args:
        robot_id: The bidding robot.
        candidate_task (Task): The task being considered.
        robot_positions (dict): robot id -> Vec2.
        assignments (AssignmentSet): Current assignment set A.
        tasks (dict): task id -> Task.
        safety_distance (float): D (m).

    Returns:
        int: 1 if any assigned neighbor's cone contains the relative velocity, else 0.
    """
    r_i = robot_positions[robot_id]
    v_i = intended_velocity(r_i, candidate_task.location)
    for q, task_q in assignments.pairs():
        if q == robot_id:
            continue
        r_q = robot_positions[q]
        v_q = intended_velocity(r_q, tasks[task_q].location)
        cone = build_cone(r_i, r_q, safety_distance)
        if relative_velocity_in_cone(cone, v_i, v_q):
            return 1
    return 0


def collision_flags(robot_pos, task_locations, neighbor_positions, neighbor_velocities, safety_distance: float) -> np.ndarray:
    """Vectorized collision_flag for one robot against every candidate task.

    Args:
        robot_pos (array_like): Shape (2,).
        task_locations (array_like): Candidate task locations, shape (T, 2).
        neighbor_positions (array_like): Assigned neighbors, shape (K, 2).
        neighbor_velocities (array_like): Their unit intended velocities, shape (K, 2).
        safety_distance (float): D (m).

    Returns:
        np.ndarray: int array of shape (T,) with values in {0, 1}.
    """
    task_locations = np.asarray(task_locations, dtype=float).reshape(-1, 2)
    neighbor_positions = np.asarray(neighbor_positions, dtype=float).reshape(-1, 2)
    if len(neighbor_positions) == 0 or len(task_locations) == 0:
        return np.zeros(len(task_locations), dtype=int)
    robot_pos = np.asarray(robot_pos, dtype=float)
    v_i = unit_rows(task_locations - robot_pos)
    rel_pos = neighbor_positions - robot_pos
    rel_vel = v_i[:, None, :] - np.asarray(neighbor_velocities, dtype=float)[None, :, :]
    inside = in_cone_mask(rel_pos[None, :, :], rel_vel, safety_distance)
    return inside.any(axis=1).astype(int)


def shaped_bid(base: float, flag: int) -> float:
    """Collision-aware bid (1 - W_il) * b_il.

    Raises:
        ParameterError: If ``base`` is negative or ``flag`` is not 0/1.
    """
    if base < 0 or not math.isfinite(base):
        raise ParameterError(f"base reward must be a finite value >= 0, got {base}")
    if flag not in (0, 1):
        raise ParameterError(f"collision flag must be 0 or 1, got {flag}")
    return 0.0 if flag == 1 else base
