# This script builds the experiment worlds (grid / line / explicit robot
# layouts against sampled tasks) and runs seeded batches of
# assignment + simulation trials, summarizing them with pandas.
import concurrent.futures
import logging
import math
from dataclasses import dataclass, field, fields

import numpy as np
import pandas as pd

from cata.auction.auction import count_path_crossings, run_algorithm
from cata.data.model_variables import AuctionConfig, SimConfig, resolve_config
from cata.data.world import Task, World, min_pairwise_spacing
from cata.exceptions import AuctionTimeout, ParameterError, SpecError
from cata.sim.sim import run_trial
from cata.utils import derive_seed
from cata.utils.geometry import Vec2

logger = logging.getLogger(__name__)

LAYOUTS = ("grid", "line", "explicit")
TASK_SAMPLERS = ("normal", "rings", "explicit")
INCIDENTS = ("avoidance_count", "maintain_one_count", "maintain_multi_count")
ROW_COLUMNS = [
    "setup",
    "algorithm",
    "trial",
    "seed",
    "n_robots",
    "n_assigned",
    "avoidance_count",
    "maintain_one_count",
    "maintain_multi_count",
    "deadlock",
    "completion_steps",
    "min_separation_observed",
    "path_crossings",
    "objective_value",
    "rounds_used",
    "auction_timeout",
    "incomplete_assignment",
]
COMPLETION_PARITY = 0.15
MAX_RESAMPLES = 1000

# 5 x 5 grid against three rings of tasks about 2 m apart, so robots parked
# on the near side of the rings stand in the way of the back rows.
RECEDING_DEMO = {
    "name": "receding_demo",
    "layout": "grid",
    "rows": 5,
    "cols": 5,
    "task_sampler": "rings",
    "n_tasks": 25,
    "layers": 3,
    "radius_step": 1.5,
}


@dataclass(frozen=True)
class WorldSpec:
    """Recipe for a world: a robot layout plus a task sampler.

    Grid and line layouts are centered ``arena_offset`` meters below the
    task-distribution center; grid robots are numbered row by row.
    """

    name: str = "world"
    layout: str = "grid"
    rows: int | None = None
    cols: int | None = None
    count: int | None = None
    spacing: float = 2.5
    arena_offset: float = 25.0
    robots: tuple = ()
    task_sampler: str = "normal"
    n_tasks: int | None = None
    sigma_x: float = 6.0
    sigma_y: float = 6.0
    center: tuple = (0.0, 0.0)
    layers: int = 3
    radius_step: float = 4.0
    tasks: tuple = ()
    robot_radius: float = 0.25
    discount: float = 0.95
    inherent_value: float = 100.0
    seed: int = 0

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise SpecError(f"{self.name}: unknown layout {self.layout!r}, expected one of {LAYOUTS}")
        if self.task_sampler not in TASK_SAMPLERS:
            raise SpecError(f"{self.name}: unknown task_sampler {self.task_sampler!r}, expected one of {TASK_SAMPLERS}")
        if self.layout == "grid" and not (self.rows and self.cols):
            raise SpecError(f"{self.name}: grid layout needs rows and cols >= 1")
        if self.layout == "line" and not self.count:
            raise SpecError(f"{self.name}: line layout needs count >= 1")
        if self.layout == "explicit" and not self.robots:
            raise SpecError(f"{self.name}: explicit layout needs a robots list")
        if self.n_robots < 1 or self.n_tasks_resolved < 1:
            raise SpecError(f"{self.name}: needs N_R >= 1 and N_T >= 1")
        if not self.spacing > 0 or not self.robot_radius > 0:
            raise SpecError(f"{self.name}: spacing and robot_radius must be positive")

    @property
    def n_robots(self) -> int:
        if self.layout == "grid":
            return int(self.rows) * int(self.cols)
        if self.layout == "line":
            return int(self.count)
        return len(self.robots)

    @property
    def n_tasks_resolved(self) -> int:
        if self.task_sampler == "explicit" and self.n_tasks is None:
            return len(self.tasks)
        return int(self.n_tasks) if self.n_tasks is not None else self.n_robots

    @classmethod
    def from_dict(cls, payload: dict, defaults: dict | None = None, name: str | None = None) -> "WorldSpec":
        """Builds a spec from a setup mapping layered over ``defaults``.

        Raises:
            SpecError: On unknown keys or malformed values.
        """
        merged = dict(defaults or {})
        merged.update(payload or {})
        if name is not None:
            merged.setdefault("name", name)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(merged) - known)
        if unknown:
            raise SpecError(f"{merged.get('name', 'world')}: unknown keys {unknown}")
        try:
            for key in ("robots", "tasks"):
                if key in merged:
                    merged[key] = tuple(_xy(item) for item in merged[key])
            if "center" in merged:
                merged["center"] = _xy(merged["center"])
        except (TypeError, ValueError, KeyError) as e:
            raise SpecError(f"{merged.get('name', 'world')}: bad coordinates: {e}") from e
        return cls(**merged)


def _xy(item) -> tuple:
    if isinstance(item, dict):
        return (float(item["x"]), float(item["y"]))
    x, y = item
    return (float(x), float(y))


def specs_from_config(config: dict) -> list:
    """One WorldSpec per configured setup, in configuration order.

    Robot radius comes from the sim section and task values from the auction section.
    """
    resolved = resolve_config(config)
    scenarios = resolved["scenarios"]
    defaults = dict(scenarios.get("defaults", {}))
    defaults.setdefault("robot_radius", resolved["sim"]["robot_radius"])
    defaults.setdefault("discount", resolved["auction"]["discount"])
    defaults.setdefault("inherent_value", resolved["auction"]["inherent_value"])
    setups = scenarios.get("setups") or {}
    if not isinstance(setups, dict) or not setups:
        raise SpecError("scenarios.setups must be a non-empty mapping")
    return [WorldSpec.from_dict(setup, defaults, name=name) for name, setup in setups.items()]


def _robot_layout(spec: WorldSpec) -> np.ndarray:
    cx, cy = spec.center
    if spec.layout == "explicit":
        return np.array(spec.robots, dtype=float).reshape(-1, 2)
    if spec.layout == "grid":
        xs = (np.arange(spec.cols) - (spec.cols - 1) / 2.0) * spec.spacing
        ys = (np.arange(spec.rows) - (spec.rows - 1) / 2.0) * spec.spacing
        gx, gy = np.meshgrid(xs, ys[::-1])
        offsets = np.column_stack([gx.ravel(), gy.ravel()])
    else:
        xs = (np.arange(spec.count) - (spec.count - 1) / 2.0) * spec.spacing
        offsets = np.column_stack([xs, np.zeros_like(xs)])
    return offsets + np.array([cx, cy - spec.arena_offset])


def _too_close(point: np.ndarray, placed: list, separation: float) -> bool:
    if not placed:
        return False
    diff = np.asarray(placed) - point
    return bool(np.min(np.hypot(diff[:, 0], diff[:, 1])) < separation)


def _normal_tasks(spec: WorldSpec, rng: np.random.Generator) -> np.ndarray:
    separation = 2.0 * spec.robot_radius
    placed = []
    for _ in range(spec.n_tasks_resolved):
        for _attempt in range(MAX_RESAMPLES):
            point = rng.normal(spec.center, (spec.sigma_x, spec.sigma_y))
            if not _too_close(point, placed, separation):
                placed.append(point)
                break
        else:
            raise SpecError(f"{spec.name}: could not place {spec.n_tasks_resolved} separated tasks")
    return np.array(placed).reshape(-1, 2)


def _ring_tasks(spec: WorldSpec, rng: np.random.Generator) -> np.ndarray:
    """Tasks on concentric circles, each layer holding a share proportional to its radius."""
    n = spec.n_tasks_resolved
    weights = np.arange(1, spec.layers + 1, dtype=float)
    counts = np.floor(n * weights / weights.sum()).astype(int)
    counts[-1] += n - counts.sum()
    points = []
    for layer, k in enumerate(counts, start=1):
        if k == 0:
            continue
        phase = rng.uniform(0.0, 2.0 * math.pi)
        angles = phase + 2.0 * math.pi * np.arange(k) / k
        radius = layer * spec.radius_step
        points.append(np.column_stack([np.cos(angles), np.sin(angles)]) * radius)
    tasks = np.vstack(points) + np.array(spec.center)
    if min_pairwise_spacing(tasks) < 2.0 * spec.robot_radius:
        raise SpecError(f"{spec.name}: ring tasks closer than 2 x robot_radius; raise radius_step")
    return tasks


def generate_world(spec: WorldSpec, seed: int | None = None) -> World:
    """Samples a world from ``spec``.

    Args:
        spec (WorldSpec): Layout and sampler description.
        seed (int | None): Overrides ``spec.seed``.

    Returns:
        World: Robots numbered 0..N_R-1 and tasks 0..N_T-1.

    Raises:
        SpecError: If robots overlap or tasks cannot be separated.
    """
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    positions = _robot_layout(spec)
    if min_pairwise_spacing(positions) < 2.0 * spec.robot_radius:
        raise SpecError(f"{spec.name}: robots overlap (spacing below 2 x robot_radius)")
    if spec.task_sampler == "normal":
        locations = _normal_tasks(spec, rng)
    elif spec.task_sampler == "rings":
        locations = _ring_tasks(spec, rng)
    else:
        locations = np.array(spec.tasks, dtype=float).reshape(-1, 2)[: spec.n_tasks_resolved]
        if len(locations) < spec.n_tasks_resolved:
            raise SpecError(f"{spec.name}: n_tasks exceeds the explicit task list")
    try:
        tasks = [
            Task(l, Vec2(float(x), float(y)), spec.inherent_value, spec.discount)
            for l, (x, y) in enumerate(locations)
        ]
    except ParameterError as e:
        raise SpecError(f"{spec.name}: {e}") from e
    return World(list(range(len(positions))), positions, tasks, name=spec.name)


def random_world(
    n_robots: int,
    n_tasks: int,
    seed: int,
    half_width: float = 5.0,
    sigma: float = 10.0,
    discount: float = 0.95,
    inherent_value: float = 100.0,
) -> World:
    """Robots uniform in a square around the origin, tasks normal around the origin."""
    rng = np.random.default_rng(seed)
    positions = rng.uniform(-half_width, half_width, size=(n_robots, 2))
    locations = rng.normal(0.0, sigma, size=(n_tasks, 2))
    tasks = [Task(l, Vec2(float(x), float(y)), inherent_value, discount) for l, (x, y) in enumerate(locations)]
    return World(list(range(n_robots)), positions, tasks, name=f"random-{seed}")


def trial_rows(spec: WorldSpec, setup_index: int, trial: int, master_seed: int, algorithms, auction_config, sim_config) -> list:
    """Runs every algorithm on the trial's world; one row per algorithm.

    A trial fails (``deadlock``) when the simulator deadlocks, the auction
    times out, or the auction ends with fewer than min(N_R, N_T) pairs.
    """
    seed = derive_seed(master_seed, setup_index, trial)
    world = generate_world(spec, seed)
    target = min(world.n_robots, world.n_tasks)
    rows = []
    for algorithm in algorithms:
        row = {"setup": spec.name, "algorithm": algorithm, "trial": trial, "seed": seed, "n_robots": world.n_robots}
        try:
            result = run_algorithm(algorithm, world, auction_config, seed)
        except AuctionTimeout as e:
            partial = e.partial
            logger.warning("%s trial %d: %s auction timed out", spec.name, trial, algorithm)
            row.update(
                n_assigned=len(partial.assignments),
                avoidance_count=0,
                maintain_one_count=0,
                maintain_multi_count=0,
                deadlock=True,
                completion_steps=0,
                min_separation_observed=math.nan,
                path_crossings=count_path_crossings(world, partial.assignments),
                objective_value=partial.objective_value,
                rounds_used=partial.rounds_used,
                auction_timeout=True,
                incomplete_assignment=len(partial.assignments) < target,
            )
            rows.append(row)
            continue
        incomplete = len(result.assignments) < target
        if incomplete:
            logger.warning(
                "%s trial %d: %s assigned %d of %d tasks", spec.name, trial, algorithm, len(result.assignments), target
            )
        metrics = run_trial(world, result.assignments, sim_config)
        separation = metrics.min_separation_observed
        row.update(
            n_assigned=len(result.assignments),
            avoidance_count=metrics.avoidance_count,
            maintain_one_count=metrics.maintain_one_count,
            maintain_multi_count=metrics.maintain_multi_count,
            deadlock=metrics.deadlock or incomplete,
            completion_steps=metrics.completion_steps,
            min_separation_observed=math.nan if math.isinf(separation) else separation,
            path_crossings=count_path_crossings(world, result.assignments),
            objective_value=result.objective_value,
            rounds_used=result.rounds_used,
            auction_timeout=False,
            incomplete_assignment=incomplete,
        )
        rows.append(row)
    return rows


def _run_job(job: tuple) -> list:
    return trial_rows(*job)


def sort_rows(rows: pd.DataFrame) -> pd.DataFrame:
    return rows.sort_values(["setup", "algorithm", "trial"], kind="mergesort").reset_index(drop=True)


@dataclass
class Summary:
    """Aggregate tables of a batch.

    Attributes:
        stats (pd.DataFrame): One row per (setup, algorithm, metric) with
            count, mean, min, q1, median, q3, max.
        deadlocks (pd.DataFrame): Trials, failed trials, auction timeouts and
            incomplete assignments per (setup, algorithm).
    """

    stats: pd.DataFrame
    deadlocks: pd.DataFrame

    def to_dict(self) -> dict:
        def records(frame: pd.DataFrame) -> list:
            return [
                {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in row.items()}
                for row in frame.astype(object).to_dict(orient="records")
            ]

        return {"stats": records(self.stats), "deadlocks": records(self.deadlocks)}


@dataclass
class BatchReport:
    rows: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=ROW_COLUMNS))

    @property
    def summary(self) -> Summary:
        return summarize(self.rows)


def _quartiles(values: pd.Series) -> dict:
    if values.empty:
        return {"count": 0, "mean": math.nan, "min": math.nan, "q1": math.nan, "median": math.nan, "q3": math.nan, "max": math.nan}
    q = values.astype(float).quantile([0.0, 0.25, 0.5, 0.75, 1.0])
    return {
        "count": int(len(values)),
        "mean": float(values.astype(float).mean()),
        "min": float(q.iloc[0]),
        "q1": float(q.iloc[1]),
        "median": float(q.iloc[2]),
        "q3": float(q.iloc[3]),
        "max": float(q.iloc[4]),
    }


def summarize(rows: pd.DataFrame) -> Summary:
    """Per (setup, algorithm): quartiles of each incident type and of the
    completion steps of successful trials, plus deadlock totals.

    Raises:
        ParameterError: If ``rows`` is empty.
    """
    if rows.empty:
        raise ParameterError("cannot summarize an empty batch")
    stats = []
    deadlocks = []
    for (setup, algorithm), group in rows.groupby(["setup", "algorithm"], sort=True):
        for metric in INCIDENTS:
            stats.append({"setup": setup, "algorithm": algorithm, "metric": metric, **_quartiles(group[metric])})
        successful = group.loc[~group["deadlock"].astype(bool), "completion_steps"]
        stats.append({"setup": setup, "algorithm": algorithm, "metric": "completion_steps", **_quartiles(successful)})
        deadlocks.append(
            {
                "setup": setup,
                "algorithm": algorithm,
                "trials": int(len(group)),
                "deadlocks": int(group["deadlock"].astype(bool).sum()),
                "auction_timeouts": int(group["auction_timeout"].astype(bool).sum()),
                "incomplete_assignments": int(group["incomplete_assignment"].astype(bool).sum()),
            }
        )
    return Summary(pd.DataFrame(stats), pd.DataFrame(deadlocks))


def acceptance_verdicts(summary: Summary, grid_cell: str = "grid_25") -> list:
    """Ordinal CATA-versus-CBAA checks for every setup holding both algorithms.

    In ``grid_cell`` the deadlock check also needs CBAA to have deadlocked at
    least once, and the maintain-multi median must be strictly lower.

    Returns:
        list[dict]: One entry per check with ``check``, ``setup``, ``passed``,
        ``cata`` and ``cbaa``.
    """
    verdicts = []
    deadlocks = summary.deadlocks.set_index(["setup", "algorithm"])
    stats = summary.stats.set_index(["setup", "algorithm", "metric"])
    setups = sorted(set(summary.deadlocks["setup"]))

    def verdict(check, setup, passed, cata, cbaa):
        verdicts.append({"check": check, "setup": setup, "passed": bool(passed), "cata": cata, "cbaa": cbaa})

    for setup in setups:
        if (setup, "cata") not in deadlocks.index or (setup, "cbaa") not in deadlocks.index:
            continue
        cata_dead = int(deadlocks.loc[(setup, "cata"), "deadlocks"])
        cbaa_dead = int(deadlocks.loc[(setup, "cbaa"), "deadlocks"])
        verdict("deadlocks_not_worse", setup, cata_dead <= cbaa_dead, cata_dead, cbaa_dead)
        if setup == grid_cell:
            verdict("deadlocks_halved", setup, cbaa_dead > 0 and cata_dead <= 0.5 * cbaa_dead, cata_dead, cbaa_dead)
        for metric in INCIDENTS:
            cata_median = float(stats.loc[(setup, "cata", metric), "median"])
            cbaa_median = float(stats.loc[(setup, "cbaa", metric), "median"])
            verdict(f"median_{metric}", setup, cata_median <= cbaa_median, cata_median, cbaa_median)
            if setup == grid_cell and metric == "maintain_multi_count":
                verdict("median_maintain_multi_strict", setup, cata_median < cbaa_median, cata_median, cbaa_median)
        cata_mean = float(stats.loc[(setup, "cata", "completion_steps"), "mean"])
        cbaa_mean = float(stats.loc[(setup, "cbaa", "completion_steps"), "mean"])
        if not (math.isnan(cata_mean) or math.isnan(cbaa_mean)):
            verdict("completion_parity", setup, abs(cata_mean - cbaa_mean) <= COMPLETION_PARITY * cbaa_mean, cata_mean, cbaa_mean)
    return verdicts


def run_batch(
    specs: list,
    algorithms=("cata", "cbaa"),
    trials: int = 100,
    sim_config: SimConfig = SimConfig(),
    auction_config: AuctionConfig = AuctionConfig(),
    master_seed: int = 0,
    jobs: int = 1,
    completed: set | None = None,
    on_rows=None,
) -> BatchReport:
    """Runs ``trials`` seeded trials of every setup with every algorithm.

    Both algorithms of a trial share one world. Results are reduced in
    (setup, trial) order, so the report does not depend on ``jobs``.

    Args:
        specs (list[WorldSpec]): Setups; their position fixes the seed stream.
        algorithms (tuple): Algorithm names understood by ``run_algorithm``.
        trials (int): Trials per setup, >= 1.
        sim_config (SimConfig): Simulator parameters.
        auction_config (AuctionConfig): Auction parameters.
        master_seed (int): Root of the per-trial seeds.
        jobs (int): Worker processes; 1 runs in-process.
        completed (set | None): (setup name, trial) keys to skip.
        on_rows (callable | None): Called with each finished job's rows.

    Returns:
        BatchReport: Rows of the trials run in this call.
    """
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    completed = completed or set()
    work = [
        (spec, setup_index, trial, master_seed, tuple(algorithms), auction_config, sim_config)
        for setup_index, spec in enumerate(specs)
        for trial in range(trials)
        if (spec.name, trial) not in completed
    ]
    skipped = len(specs) * trials - len(work)
    if skipped:
        logger.info("resuming: %d completed trials skipped", skipped)
    logger.info("batch running: %d setups x %d trials, %d jobs to run", len(specs), trials, len(work))

    rows = []
    if jobs > 1 and len(work) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as executor:
            for job_rows in executor.map(_run_job, work):
                rows.extend(job_rows)
                if on_rows is not None:
                    on_rows(job_rows)
    else:
        for job in work:
            job_rows = _run_job(job)
            rows.extend(job_rows)
            if on_rows is not None:
                on_rows(job_rows)
    logger.info("batch finished: %d rows", len(rows))
    frame = pd.DataFrame(rows, columns=ROW_COLUMNS)
    return BatchReport(sort_rows(frame) if len(frame) else frame)
