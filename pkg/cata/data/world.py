import json
import math
from dataclasses import dataclass, field

import numpy as np

from cata.exceptions import ParameterError, WorldFormatError
from cata.utils.geometry import Vec2


@dataclass(frozen=True)
class Task:
    """A task t_l at ``location`` with inherent value V_l and discount factor lambda_l."""

    id: int
    location: Vec2
    inherent_value: float = 100.0
    discount: float = 0.95

    def __post_init__(self):
        if not self.inherent_value > 0:
            raise ParameterError(f"task {self.id}: inherent_value must be > 0")
        if not 0 < self.discount <= 1:
            raise ParameterError(f"task {self.id}: discount must lie in (0, 1]")


@dataclass
class World:
    """Snapshot of robot positions and the task table.

    Robots and tasks are kept sorted by id; array rows follow that order.
    """

    robot_ids: list[int]
    robot_positions: np.ndarray
    tasks: list[Task]
    name: str = "world"
    task_index: dict[int, int] = field(init=False, repr=False)
    robot_index: dict[int, int] = field(init=False, repr=False)

    def __post_init__(self):
        positions = np.asarray(self.robot_positions, dtype=float).reshape(-1, 2)
        if len(positions) != len(self.robot_ids):
            raise ParameterError("robot_ids and robot_positions differ in length")
        if not np.all(np.isfinite(positions)):
            raise ParameterError("robot positions must be finite")
        if len(set(self.robot_ids)) != len(self.robot_ids):
            raise ParameterError("duplicate robot id")
        if len({t.id for t in self.tasks}) != len(self.tasks):
            raise ParameterError("duplicate task id")
        order = np.argsort(self.robot_ids, kind="stable")
        self.robot_ids = [int(self.robot_ids[k]) for k in order]
        self.robot_positions = positions[order]
        self.tasks = sorted(self.tasks, key=lambda t: t.id)
        self.robot_index = {r: k for k, r in enumerate(self.robot_ids)}
        self.task_index = {t.id: k for k, t in enumerate(self.tasks)}

    @property
    def n_robots(self) -> int:
        return len(self.robot_ids)

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    @property
    def task_ids(self) -> list[int]:
        return [t.id for t in self.tasks]

    @property
    def task_locations(self) -> np.ndarray:
        if not self.tasks:
            return np.zeros((0, 2))
        return np.array([[t.location.x, t.location.y] for t in self.tasks], dtype=float)

    @property
    def task_values(self) -> np.ndarray:
        return np.array([t.inherent_value for t in self.tasks], dtype=float)

    @property
    def task_discounts(self) -> np.ndarray:
        return np.array([t.discount for t in self.tasks], dtype=float)

    def position(self, robot_id: int) -> np.ndarray:
        return self.robot_positions[self.robot_index[robot_id]]

    def task(self, task_id: int) -> Task:
        return self.tasks[self.task_index[task_id]]

    def to_dict(self) -> dict:
        """World coordinate file layout: ``robots: [{id, x, y}]``, ``tasks: [{id, x, y, value, lambda}]``."""
        return {
            "robots": [
                {"id": r, "x": float(p[0]), "y": float(p[1])}
                for r, p in zip(self.robot_ids, self.robot_positions)
            ],
            "tasks": [
                {
                    "id": t.id,
                    "x": t.location.x,
                    "y": t.location.y,
                    "value": t.inherent_value,
                    "lambda": t.discount,
                }
                for t in self.tasks
            ],
        }


def world_from_dict(
    payload: dict,
    default_value: float = 100.0,
    default_discount: float = 0.95,
    path: str = "<world>",
    name: str = "world",
) -> World:
    """Builds a World from the coordinate-file layout.

    Args:
        payload (dict): Parsed JSON with ``robots`` and ``tasks`` lists.
        default_value (float): V used for tasks without a ``value`` entry.
        default_discount (float): lambda used for tasks without a ``lambda`` entry.
        path (str): Source file, for error messages.
        name (str): Name carried by the world.

    Returns:
        World: The parsed world.

    Raises:
        WorldFormatError: If the payload does not follow the schema.
    """
    if not isinstance(payload, dict):
        raise WorldFormatError("world must be a JSON object", path, 1)
    for key in ("robots", "tasks"):
        if not isinstance(payload.get(key), list):
            raise WorldFormatError(f"missing list '{key}'", path)
    try:
        robot_ids = [int(r["id"]) for r in payload["robots"]]
        positions = [[float(r["x"]), float(r["y"])] for r in payload["robots"]]
        tasks = [
            Task(
                id=int(t["id"]),
                location=Vec2(float(t["x"]), float(t["y"])),
                inherent_value=float(t.get("value", default_value)),
                discount=float(t.get("lambda", default_discount)),
            )
            for t in payload["tasks"]
        ]
        return World(robot_ids, np.array(positions).reshape(-1, 2), tasks, name=name)
    except (KeyError, TypeError) as e:
        raise WorldFormatError(f"bad robot/task entry: {e!r}", path) from e
    except ParameterError as e:
        raise WorldFormatError(str(e), path) from e


def read_json(path: str):
    """Reads a JSON file, turning decode errors into line-anchored input errors."""
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise WorldFormatError(e.msg, path, e.lineno) from e


def read_world(path: str, default_value: float = 100.0, default_discount: float = 0.95) -> World:
    """Reads a world coordinate file."""
    payload = read_json(path)
    return world_from_dict(payload, default_value, default_discount, path=path)


def max_pairwise_spacing(positions: np.ndarray) -> float:
    """Largest distance between two robots, 0 for fewer than two."""
    positions = np.asarray(positions, dtype=float)
    if len(positions) < 2:
        return 0.0
    diff = positions[:, None, :] - positions[None, :, :]
    return float(np.max(np.hypot(diff[..., 0], diff[..., 1])))


def min_pairwise_spacing(positions: np.ndarray) -> float:
    """Smallest distance between two robots, inf for fewer than two."""
    positions = np.asarray(positions, dtype=float)
    if len(positions) < 2:
        return math.inf
    diff = positions[:, None, :] - positions[None, :, :]
    distance = np.hypot(diff[..., 0], diff[..., 1])
    np.fill_diagonal(distance, np.inf)
    return float(np.min(distance))
