from cata.scenarios.scenarios import (
    RECEDING_DEMO,
    ROW_COLUMNS,
    BatchReport,
    Summary,
    WorldSpec,
    acceptance_verdicts,
    generate_world,
    random_world,
    run_batch,
    sort_rows,
    specs_from_config,
    summarize,
)

__all__ = [
    "RECEDING_DEMO",
    "ROW_COLUMNS",
    "BatchReport",
    "Summary",
    "WorldSpec",
    "acceptance_verdicts",
    "generate_world",
    "random_world",
    "run_batch",
    "sort_rows",
    "specs_from_config",
    "summarize",
]
