import copy
import math
from dataclasses import dataclass

from cata.exceptions import ParameterError
from cata.utils import deep_merge

# Every default lives here so a run manifest can echo the fully resolved set.
DEFAULT_CONFIG = {
    "auction": {
        "safety_distance_initial": None,  # None: max pairwise robot spacing at start
        "safety_distance_min": 1e-3,  # m, floor where only near-identical headings conflict
        "horizon_decay": 0.8,
        "max_rounds": None,  # None: 50 x N_T
        "discount": 0.95,
        "inherent_value": 100.0,
        "speed": 1.0,  # m/s, used for the travel-time estimate
    },
    "sim": {
        "time_step": 0.1,  # s
        "max_speed": 1.0,  # m/s
        "robot_radius": 0.25,  # m
        "safety_zone_radius": 1.5,  # m
        "sensing_radius": 3.0,  # m
        "arrival_threshold": 0.1,  # m
        "max_steps": 5000,
        "stagnation_window": 100,
        "repulsion_gain": 0.5,  # below 1 so one neighbor cannot cancel nominal speed
        "episode_hysteresis": 1,
        "rotation_step_deg": 2.0,
    },
    "oracle": {
        "safety_distance": 1.0,  # m, fixed D for the bound check
        "max_size": 8,
    },
    "scenarios": {
        "master_seed": 0,
        "trials": 100,
        "algorithms": ["cata", "cbaa"],
        "defaults": {
            "task_sampler": "normal",
            "sigma_x": 6.0,
            "sigma_y": 6.0,
            "center": [0.0, 0.0],
            "spacing": 2.5,
            "arena_offset": 25.0,
        },
        "setups": {
            "grid_9": {"layout": "grid", "rows": 3, "cols": 3, "n_tasks": 9},
            "line_9": {"layout": "line", "count": 9, "n_tasks": 9},
            "grid_25": {"layout": "grid", "rows": 5, "cols": 5, "n_tasks": 25},
            "line_25": {"layout": "line", "count": 25, "n_tasks": 25},
        },
    },
}


def resolve_config(overrides: dict | None = None) -> dict:
    """Merges user overrides over DEFAULT_CONFIG.

    Args:
        overrides (dict | None): Parsed user YAML, possibly partial.

    Returns:
        dict: The fully resolved configuration. User ``scenarios.setups``
        replace the default setups instead of being merged into them.
    """
    overrides = overrides or {}
    resolved = deep_merge(DEFAULT_CONFIG, overrides)
    scenarios = overrides.get("scenarios")
    if isinstance(scenarios, dict) and scenarios.get("setups") is not None:
        resolved["scenarios"]["setups"] = copy.deepcopy(scenarios["setups"])
    return resolved


def _positive(name: str, value) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ParameterError(f"{name} must be a positive number, got {value!r}")


@dataclass(frozen=True)
class AuctionConfig:
    """Auction and receding-horizon parameters."""

    safety_distance_initial: float | None = None
    safety_distance_min: float = 1e-3
    horizon_decay: float = 0.8
    max_rounds: int | None = None
    discount: float = 0.95
    inherent_value: float = 100.0
    speed: float = 1.0

    def __post_init__(self):
        _positive("safety_distance_min", self.safety_distance_min)
        if self.safety_distance_initial is not None:
            _positive("safety_distance_initial", self.safety_distance_initial)
            if self.safety_distance_initial < self.safety_distance_min:
                raise ParameterError("safety_distance_initial must be >= safety_distance_min")
        if not 0 < self.horizon_decay < 1:
            raise ParameterError(f"horizon_decay must lie in (0, 1), got {self.horizon_decay}")
        if self.max_rounds is not None and int(self.max_rounds) < 1:
            raise ParameterError("max_rounds must be >= 1")
        if not 0 < self.discount <= 1:
            raise ParameterError(f"discount must lie in (0, 1], got {self.discount}")
        _positive("inherent_value", self.inherent_value)
        _positive("speed", self.speed)

    @classmethod
    def from_config(cls, config: dict) -> "AuctionConfig":
        try:
            return cls(**resolve_config(config)["auction"])
        except TypeError as e:
            raise ParameterError(f"auction section: {e}") from e

    def round_limit(self, n_tasks: int) -> int:
        if self.max_rounds is not None:
            return int(self.max_rounds)
        return max(1, 50 * n_tasks)


@dataclass(frozen=True)
class SimConfig:
    """Kinematic simulator and reactive avoidance parameters."""

    time_step: float = 0.1
    max_speed: float = 1.0
    robot_radius: float = 0.25
    safety_zone_radius: float = 1.5
    sensing_radius: float = 3.0
    arrival_threshold: float = 0.1
    max_steps: int = 5000
    stagnation_window: int = 100
    repulsion_gain: float = 0.5
    episode_hysteresis: int = 1
    rotation_step_deg: float = 2.0

    def __post_init__(self):
        for name in (
            "time_step",
            "max_speed",
            "robot_radius",
            "safety_zone_radius",
            "sensing_radius",
            "arrival_threshold",
            "max_steps",
            "stagnation_window",
            "repulsion_gain",
            "rotation_step_deg",
        ):
            _positive(name, getattr(self, name))
        if self.episode_hysteresis < 0:
            raise ParameterError("episode_hysteresis must be >= 0")
        if self.safety_zone_radius <= self.contact_distance:
            raise ParameterError("safety_zone_radius must exceed 2 x robot_radius")

    @property
    def contact_distance(self) -> float:
        return 2.0 * self.robot_radius

    @classmethod
    def from_config(cls, config: dict) -> "SimConfig":
        try:
            return cls(**resolve_config(config)["sim"])
        except TypeError as e:
            raise ParameterError(f"sim section: {e}") from e
