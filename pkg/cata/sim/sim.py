import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import pandas as pd

from cata.data.model_variables import SimConfig
from cata.data.world import World, min_pairwise_spacing
from cata.exceptions import SpecError
from cata.utils.geometry import Vec2, in_cone_mask, rotate, unit_rows
from cata.utils.stigmergy import AssignmentSet

logger = logging.getLogger(__name__)

TRACE_COLUMNS = [
    "step",
    "robot_id",
    "x",
    "y",
    "vx",
    "vy",
    "avoidance",
    "maintain_one",
    "maintain_multi",
    "stopped",
]
PROGRESS_TOLERANCE = 1e-9


@dataclass(frozen=True)
class RobotState:
    """One robot as seen by its neighbors at the start of a step."""

    id: int
    position: Vec2
    velocity: Vec2
    assigned_task: int | None
    arrived: bool
    radius: float

    @property
    def moving(self) -> bool:
        return self.assigned_task is not None and not self.arrived


@dataclass
class SimState:
    """Array form of the swarm; row k belongs to ``robot_ids[k]``.

    Idle robots (no task) keep their own position as goal and never move.
    """

    robot_ids: list
    positions: np.ndarray
    velocities: np.ndarray
    goals: np.ndarray
    assigned_tasks: list
    arrived: np.ndarray
    radius: float
    step_index: int = 0

    @classmethod
    def from_assignment(cls, world: World, assignments: AssignmentSet, config: SimConfig) -> "SimState":
        """Places every robot at its start with velocity zero.

        Raises:
            SpecError: If the assignment names a robot or task that is not in the world.
        """
        for robot_id, task_id in assignments.pairs():
            if robot_id not in world.robot_index:
                raise SpecError(f"assignment references unknown robot {robot_id}")
            if task_id not in world.task_index:
                raise SpecError(f"assignment references unknown task {task_id}")
        positions = np.array(world.robot_positions, dtype=float).reshape(-1, 2)
        goals = positions.copy()
        tasks = [None] * world.n_robots
        for robot_id, task_id in assignments.pairs():
            k = world.robot_index[robot_id]
            goals[k] = world.task(task_id).location.as_array()
            tasks[k] = task_id
        state = cls(
            robot_ids=list(world.robot_ids),
            positions=positions,
            velocities=np.zeros_like(positions),
            goals=goals,
            assigned_tasks=tasks,
            arrived=np.zeros(world.n_robots, dtype=bool),
            radius=config.robot_radius,
        )
        state.arrived = state.has_task & (state.goal_distances() <= config.arrival_threshold)
        return state

    @property
    def has_task(self) -> np.ndarray:
        return np.array([t is not None for t in self.assigned_tasks], dtype=bool)

    @property
    def moving(self) -> np.ndarray:
        return self.has_task & ~self.arrived

    @property
    def done(self) -> bool:
        return not self.moving.any()

    def goal_distances(self) -> np.ndarray:
        offset = self.goals - self.positions
        return np.hypot(offset[:, 0], offset[:, 1])

    def distances(self) -> np.ndarray:
        diff = self.positions[None, :, :] - self.positions[:, None, :]
        return np.hypot(diff[..., 0], diff[..., 1])

    def robot(self, k: int) -> RobotState:
        return RobotState(
            id=self.robot_ids[k],
            position=Vec2.of(self.positions[k]),
            velocity=Vec2.of(self.velocities[k]),
            assigned_task=self.assigned_tasks[k],
            arrived=bool(self.arrived[k]),
            radius=self.radius,
        )

    def robots(self) -> list[RobotState]:
        return [self.robot(k) for k in range(len(self.robot_ids))]


@dataclass(frozen=True)
class AvoidanceOutcome:
    """Adjusted velocity of one robot and the neighbors that caused it.

    Attributes:
        velocity (np.ndarray): Velocity to integrate this step.
        cone_neighbors (tuple): Ids whose collision cone held the nominal velocity.
        zone_neighbors (tuple): Ids inside the safety zone but outside any cone.
        stopped (bool): No rotation escaped every cone, so the robot holds still.
    """

    velocity: np.ndarray
    cone_neighbors: tuple = ()
    zone_neighbors: tuple = ()
    stopped: bool = False


@dataclass
class StepEvents:
    velocities: np.ndarray
    cone_pairs: set = field(default_factory=set)  # (k, j) row indices with k < j
    zone_neighbors: dict = field(default_factory=dict)  # row -> rows
    avoiding: set = field(default_factory=set)
    stopped: set = field(default_factory=set)


@dataclass
class TrialMetrics:
    """Incident counters and outcome of one simulated trial."""

    avoidance_count: int = 0
    maintain_one_count: int = 0
    maintain_multi_count: int = 0
    deadlock: bool = False
    completion_steps: int = 0
    min_separation_observed: float = math.inf
    deadlock_reason: str | None = None
    final_positions: dict = field(default_factory=dict)
    trace: pd.DataFrame | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        separation = self.min_separation_observed
        return {
            "avoidance_count": self.avoidance_count,
            "maintain_one_count": self.maintain_one_count,
            "maintain_multi_count": self.maintain_multi_count,
            "deadlock": self.deadlock,
            "deadlock_reason": self.deadlock_reason,
            "completion_steps": self.completion_steps,
            "min_separation_observed": None if math.isinf(separation) else separation,
            "final_positions": [
                {"id": robot_id, "x": xy[0], "y": xy[1]} for robot_id, xy in sorted(self.final_positions.items())
            ],
        }


@lru_cache(maxsize=None)
def _escape_angles(step_deg: float) -> np.ndarray:
    """Rotation candidates by growing magnitude, clockwise before counterclockwise."""
    steps = np.arange(1, int(math.floor(180.0 / step_deg)) + 1) * step_deg
    return np.radians(np.column_stack([-steps, steps]).ravel())


def _approaching_in_cone(rel_pos, rel_vel, contact_distance: float) -> np.ndarray:
    # Overlapping robots are a degenerate cone; only closing velocities count there.
    closing = np.sum(np.asarray(rel_pos) * np.asarray(rel_vel), axis=-1) > 0
    return in_cone_mask(rel_pos, rel_vel, contact_distance) & closing


def nominal_velocity(state: SimState, k: int, config: SimConfig) -> np.ndarray:
    """Straight-line velocity toward the goal, slowed so the step cannot overshoot."""
    offset = state.goals[k] - state.positions[k]
    distance = math.hypot(offset[0], offset[1])
    if distance == 0:
        return np.zeros(2)
    speed = min(config.max_speed, distance / config.time_step)
    return offset / distance * speed


def reactive_avoidance(robot: RobotState, nominal, neighbors: list, config: SimConfig) -> AvoidanceOutcome:
    """Adjusts one robot's nominal velocity against its sensed neighbors.

    Maneuver: when the nominal velocity lies in a neighbor's collision cone
    (safety distance = contact distance), the velocity is rotated by the
    smallest multiple of ``rotation_step_deg`` that leaves every cone,
    clockwise first on ties. With no such rotation the robot stops.

    Maintenance: neighbors inside the safety zone but outside the cones add
    a repulsion of ``repulsion_gain`` x penetration depth along the
    separation; the result is clipped to ``max_speed``. A stopped robot
    ignores repulsion and holds still.

    Neighbors are judged by the velocity they held at the end of the previous step.
    """
    nominal = np.asarray(nominal, dtype=float)
    origin = robot.position.as_array()
    nearby = []
    for other in neighbors:
        if other.id == robot.id:
            continue
        if np.hypot(*(other.position.as_array() - origin)) <= config.sensing_radius:
            nearby.append(other)
    if not nearby:
        return AvoidanceOutcome(nominal)

    rel_pos = np.array([other.position.as_array() for other in nearby]) - origin
    their_velocity = np.array([other.velocity.as_array() for other in nearby])
    distance = np.hypot(rel_pos[:, 0], rel_pos[:, 1])
    contact = config.contact_distance

    in_cone = _approaching_in_cone(rel_pos, nominal - their_velocity, contact)
    velocity = nominal
    stopped = False
    if in_cone.any():
        candidates = rotate(nominal, _escape_angles(config.rotation_step_deg))
        blocked = _approaching_in_cone(
            rel_pos[None, :, :], candidates[:, None, :] - their_velocity[None, :, :], contact
        ).any(axis=1)
        free = np.flatnonzero(~blocked)
        if len(free):
            velocity = candidates[free[0]]
        else:
            velocity = np.zeros(2)
            stopped = True

    in_zone = (distance < config.safety_zone_radius) & ~in_cone
    if in_zone.any() and not stopped:
        away = unit_rows(-rel_pos[in_zone])
        depth = config.safety_zone_radius - distance[in_zone]
        velocity = velocity + config.repulsion_gain * np.sum(depth[:, None] * away, axis=0)
        speed = math.hypot(velocity[0], velocity[1])
        if speed > config.max_speed:
            velocity = velocity * (config.max_speed / speed)

    return AvoidanceOutcome(
        velocity=velocity,
        cone_neighbors=tuple(other.id for other, hit in zip(nearby, in_cone) if hit),
        zone_neighbors=tuple(other.id for other, hit in zip(nearby, in_zone) if hit),
        stopped=stopped,
    )


def step(state: SimState, config: SimConfig) -> tuple[SimState, StepEvents]:
    """Advances the swarm by one time step with simultaneous updates.

    Every moving robot reads the same snapshot (positions and the previous
    step's velocities); positions then integrate by ``time_step``. Robots
    that end within ``arrival_threshold`` of their task are marked arrived
    and hold zero velocity from then on.

    Returns:
        tuple[SimState, StepEvents]: The next state and what happened in the step.
    """
    robots = state.robots()
    index = {robot_id: k for k, robot_id in enumerate(state.robot_ids)}
    distances = state.distances()
    events = StepEvents(velocities=np.zeros_like(state.positions))
    for k in np.flatnonzero(state.moving):
        k = int(k)
        sensed = [robots[j] for j in np.flatnonzero(distances[k] <= config.sensing_radius) if j != k]
        outcome = reactive_avoidance(robots[k], nominal_velocity(state, k, config), sensed, config)
        events.velocities[k] = outcome.velocity
        for other in outcome.cone_neighbors:
            j = index[other]
            events.cone_pairs.add((min(k, j), max(k, j)))
            events.avoiding.add(k)
        if outcome.zone_neighbors:
            events.zone_neighbors[k] = tuple(index[other] for other in outcome.zone_neighbors)
        if outcome.stopped:
            events.stopped.add(k)

    positions = state.positions + events.velocities * config.time_step
    offset = state.goals - positions
    reached = state.moving & (np.hypot(offset[:, 0], offset[:, 1]) <= config.arrival_threshold)
    arrived = state.arrived | reached
    next_state = SimState(
        robot_ids=state.robot_ids,
        positions=positions,
        velocities=np.where(arrived[:, None], 0.0, events.velocities),
        goals=state.goals,
        assigned_tasks=state.assigned_tasks,
        arrived=arrived,
        radius=state.radius,
        step_index=state.step_index + 1,
    )
    return next_state, events


class IncidentTracker:
    """Turns per-step trigger events into incident episodes.

    An avoidance episode belongs to an unordered pair: it opens when the pair
    enters a cone and lasts, within sensing range, until the pair is moving
    apart outside the safety zone. maintain-one episodes are keyed by pair and
    maintain-multi episodes by robot, counted from the neighbors a robot has
    inside its safety zone and outside every cone in that step. They close
    once ``episode_hysteresis`` full steps pass without the trigger.
    """

    def __init__(self, config: SimConfig):
        self.sensing_radius = config.sensing_radius
        self.zone_radius = config.safety_zone_radius
        self.hysteresis = config.episode_hysteresis
        self.engaged: set = set()
        self.last_active: dict = {}
        self.avoidance_count = 0
        self.maintain_one_count = 0
        self.maintain_multi_count = 0
        self._previous_distances = None

    def _opens_episode(self, key, step_index: int) -> bool:
        last = self.last_active.get(key)
        self.last_active[key] = step_index
        return last is None or step_index - last > self.hysteresis

    def observe(self, step_index: int, distances: np.ndarray, events: StepEvents) -> None:
        """Records one step.

        Args:
            step_index (int): 1-based step number.
            distances (np.ndarray): Pairwise distances the triggers were evaluated on.
            events (StepEvents): Triggers raised in the step.
        """
        previous = distances if self._previous_distances is None else self._previous_distances
        self.engaged = {
            pair
            for pair in self.engaged
            if pair in events.cone_pairs
            or (
                distances[pair] <= self.sensing_radius
                and (distances[pair] < previous[pair] or distances[pair] < self.zone_radius)
            )
        }
        for pair in sorted(events.cone_pairs):
            if pair not in self.engaged:
                self.engaged.add(pair)
                self.avoidance_count += 1

        for k, others in sorted(events.zone_neighbors.items()):
            if len(others) == 1:
                j = others[0]
                if self._opens_episode(("one", min(k, j), max(k, j)), step_index):
                    self.maintain_one_count += 1
            elif len(others) > 1:
                if self._opens_episode(("multi", k), step_index):
                    self.maintain_multi_count += 1
        self._previous_distances = distances


def _trace_rows(state: SimState, events: StepEvents) -> list:
    rows = []
    for k, robot_id in enumerate(state.robot_ids):
        zone = len(events.zone_neighbors.get(k, ()))
        rows.append(
            (
                state.step_index,
                robot_id,
                state.positions[k, 0],
                state.positions[k, 1],
                events.velocities[k, 0],
                events.velocities[k, 1],
                int(k in events.avoiding),
                int(zone == 1),
                int(zone > 1),
                int(k in events.stopped),
            )
        )
    return rows


def run_trial(
    world: World,
    assignments: AssignmentSet,
    config: SimConfig = SimConfig(),
    record_trace: bool = False,
) -> TrialMetrics:
    """Executes an assignment until every assigned robot arrives or the swarm deadlocks.

    Deadlock is declared when ``max_steps`` is reached, or when no robot has
    improved its best distance to goal for ``stagnation_window`` steps.

    Args:
        world (World): Start positions and tasks.
        assignments (AssignmentSet): Output of any assignment procedure.
        config (SimConfig): Simulator parameters.
        record_trace (bool): Keep one row per robot per step in ``metrics.trace``.

    Returns:
        TrialMetrics: Counters and outcome of the trial.
    """
    state = SimState.from_assignment(world, assignments, config)
    tracker = IncidentTracker(config)
    best = state.goal_distances()
    last_progress = 0
    min_separation = min_pairwise_spacing(state.positions)
    rows = []
    reason = None

    while not state.done:
        if state.step_index >= config.max_steps:
            reason = "step_cap"
            break
        if state.step_index - last_progress >= config.stagnation_window:
            reason = "stagnation"
            break
        distances = state.distances()
        state, events = step(state, config)
        tracker.observe(state.step_index, distances, events)
        goal_distance = state.goal_distances()
        if np.any(goal_distance < best - PROGRESS_TOLERANCE):
            last_progress = state.step_index
            best = np.minimum(best, goal_distance)
        min_separation = min(min_separation, min_pairwise_spacing(state.positions))
        if record_trace:
            rows.extend(_trace_rows(state, events))

    if reason is not None:
        logger.debug("deadlock (%s) after %d steps", reason, state.step_index)
    return TrialMetrics(
        avoidance_count=tracker.avoidance_count,
        maintain_one_count=tracker.maintain_one_count,
        maintain_multi_count=tracker.maintain_multi_count,
        deadlock=reason is not None,
        completion_steps=state.step_index,
        min_separation_observed=min_separation,
        deadlock_reason=reason,
        final_positions={
            robot_id: (float(p[0]), float(p[1])) for robot_id, p in zip(state.robot_ids, state.positions)
        },
        trace=pd.DataFrame(rows, columns=TRACE_COLUMNS) if record_trace else None,
    )
