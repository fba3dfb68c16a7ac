"""Command-line front end.

Subcommands:
    assign        run one assignment procedure on a world and write the pairs
    simulate      execute an assignment artifact and write trial metrics
    batch         seeded grid/line experiment batches (rows.csv, summary.json)
    verify-bound  check CATA against the exhaustive optimum on random instances

Exit codes: 0 success, 2 input error, 3 I/O error, 4 property violation.
"""
import argparse
import logging
import os
import sys

import pandas as pd

from cata import __version__
from cata.auction import ALGORITHMS, count_path_crossings, run_algorithm
from cata.data.model_variables import AuctionConfig, SimConfig, resolve_config
from cata.data.world import read_json, world_from_dict
from cata.exceptions import (
    AuctionTimeout,
    InputFileError,
    OracleSizeError,
    OutputError,
    ParameterError,
    ProtocolError,
    SpecError,
    WorldFormatError,
)
from cata.oracle import evaluate_objective, verify_bound
from cata.scenarios import (
    WorldSpec,
    acceptance_verdicts,
    generate_world,
    run_batch,
    sort_rows,
    specs_from_config,
    summarize,
)
from cata.sim import run_trial
from cata.utils import dump_json, load_config
from cata.utils.stigmergy import AssignmentSet

logger = logging.getLogger(__name__)

SCHEMA = 1
EXIT_OK = 0
EXIT_INPUT = 2
EXIT_IO = 3
EXIT_VIOLATION = 4
CHECKPOINT_EVERY = 10


def _resolved_config(args) -> dict:
    return resolve_config(load_config(args.config) if args.config else {})


def _manifest(args, config: dict, seed, outputs: list) -> dict:
    return {
        "command": args.command,
        "config_path": args.config,
        "config": config,
        "seed": seed,
        "version": __version__,
        "outputs": outputs,
    }


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise OutputError(e.strerror or str(e), path) from e


def _write_csv(path: str, frame: pd.DataFrame) -> None:
    try:
        frame.to_csv(path, index=False, lineterminator="\n")
    except OSError as e:
        raise OutputError(e.strerror or str(e), path) from e


def _load_world(path: str, config: dict, seed: int):
    """A file holding ``robots`` is an explicit world; one holding ``layout`` is a WorldSpec."""
    payload = read_json(path)
    auction = config["auction"]
    if isinstance(payload, dict) and "layout" in payload:
        defaults = dict(config["scenarios"]["defaults"])
        defaults.update(
            robot_radius=config["sim"]["robot_radius"],
            discount=auction["discount"],
            inherent_value=auction["inherent_value"],
        )
        try:
            spec = WorldSpec.from_dict(payload, defaults, name=os.path.splitext(os.path.basename(path))[0])
        except SpecError as e:
            raise WorldFormatError(str(e), path) from e
        return generate_world(spec, seed)
    return world_from_dict(payload, auction["inherent_value"], auction["discount"], path=path)


def cmd_assign(args) -> int:
    config = _resolved_config(args)
    auction_config = AuctionConfig.from_config(config)
    world = _load_world(args.world, config, args.seed)
    logger.info("assign running: %s on %d robots, %d tasks", args.algo, world.n_robots, world.n_tasks)
    timed_out = False
    try:
        result = run_algorithm(args.algo, world, auction_config, args.seed)
    except AuctionTimeout as e:
        logger.warning("%s", e)
        result, timed_out = e.partial, True
    # Joint flags use the last horizon D for the auctions, D_min for the rest.
    joint_distance = result.final_safety_distance or auction_config.safety_distance_min
    artifact = {
        "schema": SCHEMA,
        "manifest": _manifest(args, config, args.seed, [args.out] if args.out else []),
        "algorithm": result.algorithm,
        "world": world.to_dict(),
        "pairs": [{"robot": w.robot_id, "task": w.task_id, "bid": w.bid_value} for w in sorted(result.winners, key=lambda w: w.robot_id)],
        "objective_sequential": result.objective_value,
        "objective_joint": evaluate_objective(result.assignments, world, joint_distance, auction_config),
        "joint_safety_distance": joint_distance,
        "horizon_trace": result.horizon_trace,
        "rounds_used": result.rounds_used,
        "stalled": result.stalled,
        "timed_out": timed_out,
        "path_crossings": count_path_crossings(world, result.assignments),
    }
    _write_text(args.out, dump_json(artifact))
    return EXIT_OK


def _read_assignment(path: str):
    payload = read_json(path)
    if not isinstance(payload, dict) or "world" not in payload or not isinstance(payload.get("pairs"), list):
        raise WorldFormatError("assignment artifact needs 'world' and 'pairs'", path)
    world = world_from_dict(payload["world"], path=path)
    try:
        assignments = AssignmentSet((int(p["robot"]), int(p["task"])) for p in payload["pairs"])
    except (KeyError, TypeError, ValueError) as e:
        raise WorldFormatError(f"bad pair entry: {e!r}", path) from e
    except ProtocolError as e:
        raise WorldFormatError(str(e), path) from e
    return world, assignments


def cmd_simulate(args) -> int:
    config = _resolved_config(args)
    sim_config = SimConfig.from_config(config)
    world, assignments = _read_assignment(args.assignment)
    logger.info("simulate running: %d robots, %d pairs", world.n_robots, len(assignments))
    metrics = run_trial(world, assignments, sim_config, record_trace=args.trace is not None)
    outputs = [path for path in (args.out, args.trace) if path]
    payload = {
        "schema": SCHEMA,
        "manifest": _manifest(args, config, args.seed, outputs),
        "assignment_file": args.assignment,
        "metrics": metrics.to_dict(),
    }
    if args.trace is not None:
        _write_csv(args.trace, metrics.trace)
    _write_text(args.out, dump_json(payload))
    return EXIT_OK


def _completed_trials(rows: pd.DataFrame, n_algorithms: int) -> set:
    counts = rows.groupby(["setup", "trial"]).size()
    return {(str(setup), int(trial)) for (setup, trial), n in counts.items() if n >= n_algorithms}


def cmd_batch(args) -> int:
    overrides = load_config(args.config) if args.config else {}
    if args.spec:
        spec = load_config(args.spec)
        scenarios = spec.get("scenarios", spec)
        overrides = {**overrides, "scenarios": {**overrides.get("scenarios", {}), **scenarios}}
    config = resolve_config(overrides)
    scenarios = config["scenarios"]
    try:
        specs = specs_from_config(config)
    except SpecError as e:
        raise WorldFormatError(str(e), args.spec or args.config or "<defaults>") from e
    algorithms = tuple(scenarios["algorithms"])
    unknown = [a for a in algorithms if a not in ALGORITHMS]
    if unknown:
        raise ParameterError(f"unknown algorithms {unknown}, expected some of {ALGORITHMS}")
    trials = int(args.trials if args.trials is not None else scenarios["trials"])
    master_seed = int(args.seed if args.seed is not None else scenarios["master_seed"])

    out = args.out or "."
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as e:
        raise OutputError(e.strerror or str(e), out) from e
    rows_path = os.path.join(out, "rows.csv")
    summary_path = os.path.join(out, "summary.json")
    manifest_path = os.path.join(out, "manifest.json")

    names = {s.name for s in specs}
    previous = pd.DataFrame()
    completed = set()
    if args.resume and os.path.exists(rows_path):
        previous = pd.read_csv(rows_path, float_precision="round_trip")
        previous = previous[previous["setup"].isin(names) & (previous["trial"] < trials)]
        completed = _completed_trials(previous, len(algorithms))
        keys = list(zip(previous["setup"], previous["trial"]))
        previous = previous[[key in completed for key in keys]]

    fresh = []

    def checkpoint(job_rows):
        fresh.extend(job_rows)
        if len(fresh) % (CHECKPOINT_EVERY * len(algorithms)) == 0:
            frames = [frame for frame in (previous, pd.DataFrame(fresh)) if len(frame)]
            _write_csv(rows_path, sort_rows(pd.concat(frames, ignore_index=True)))

    report = run_batch(
        specs,
        algorithms,
        trials,
        SimConfig.from_config(config),
        AuctionConfig.from_config(config),
        master_seed,
        jobs=args.jobs,
        completed=completed,
        on_rows=checkpoint,
    )
    frames = [frame for frame in (previous, report.rows) if len(frame)]
    rows = sort_rows(pd.concat(frames, ignore_index=True))
    _write_csv(rows_path, rows)

    manifest = _manifest(args, config, master_seed, [rows_path, summary_path, manifest_path])
    manifest["trials"] = trials
    summary = summarize(rows)
    _write_text(
        summary_path,
        dump_json(
            {
                "schema": SCHEMA,
                "manifest": manifest,
                "summary": summary.to_dict(),
                "acceptance": acceptance_verdicts(summary),
            }
        ),
    )
    _write_text(manifest_path, dump_json({"schema": SCHEMA, "manifest": manifest}))
    return EXIT_OK


def cmd_verify_bound(args) -> int:
    config = _resolved_config(args)
    oracle = config["oracle"]
    seed = args.seed if args.seed is not None else 0
    logger.info("verify-bound running: %d instances, N in [%d, %d]", args.count, args.n_min, args.n_max)
    report = verify_bound(
        args.count,
        (args.n_min, args.n_max),
        seed,
        safety_distance=float(oracle["safety_distance"]),
        config=AuctionConfig.from_config(config),
        evaluator=evaluate_objective,
        max_size=int(oracle["max_size"]),
    )
    payload = {
        "schema": SCHEMA,
        "manifest": _manifest(args, config, seed, [args.out] if args.out else []),
        "report": report.to_dict(),
    }
    _write_text(args.out, dump_json(payload))
    if not report.ok:
        for instance_seed, n, ratio in report.violations:
            print(f"bound violated: seed={instance_seed} n={n} ratio={ratio:.6f}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file, or a directory holding config.yaml.")
    common.add_argument("--seed", type=int, default=None, help="Seed for randomized steps.")
    common.add_argument("--out", help="Output file (directory for batch). Defaults to stdout.")
    common.add_argument("-v", "--verbose", action="count", default=0)
    common.add_argument("-q", "--quiet", action="store_true")

    argparser = argparse.ArgumentParser(prog="cata", description="Collision-aware task assignment.")
    argparser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = argparser.add_subparsers(dest="command", required=True)

    assign = commands.add_parser("assign", parents=[common], help="Assign tasks to robots.")
    assign.add_argument("--algo", choices=ALGORITHMS, default="cata")
    assign.add_argument("--world", required=True, help="World JSON: explicit coordinates or a layout spec.")
    assign.set_defaults(handler=cmd_assign)

    simulate = commands.add_parser("simulate", parents=[common], help="Simulate an assignment artifact.")
    simulate.add_argument("assignment", help="JSON written by 'cata assign'.")
    simulate.add_argument("--trace", help="Write per-step robot states to this CSV file.")
    simulate.set_defaults(handler=cmd_simulate)

    batch = commands.add_parser("batch", parents=[common], help="Run seeded experiment batches.")
    batch.add_argument("--spec", help="YAML with scenario setups; replaces the configured setups.")
    batch.add_argument("--trials", type=int)
    batch.add_argument("--jobs", type=int, default=1)
    batch.add_argument("--resume", action="store_true", help="Skip trials already in rows.csv.")
    batch.set_defaults(handler=cmd_batch)

    bound = commands.add_parser("verify-bound", parents=[common], help="Check CATA against the exhaustive optimum.")
    bound.add_argument("--count", type=int, default=500)
    bound.add_argument("--n-min", type=int, default=2)
    bound.add_argument("--n-max", type=int, default=7)
    bound.set_defaults(handler=cmd_verify_bound)
    return argparser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.ERROR if args.quiet else max(logging.DEBUG, logging.WARNING - 10 * args.verbose)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "assign" and args.seed is None:
        args.seed = 0
    try:
        return args.handler(args)
    except OutputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (InputFileError, SpecError, ParameterError, ProtocolError, OracleSizeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as e:
        print(f"error: {e.filename or e}: file not found", file=sys.stderr)
        return EXIT_INPUT
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
