from cata.oracle.oracle import (
    BoundReport,
    ObjectiveReport,
    brute_force_optimum,
    evaluate_objective,
    pair_conflicts,
    verify_bound,
)

__all__ = [
    "BoundReport",
    "ObjectiveReport",
    "brute_force_optimum",
    "evaluate_objective",
    "pair_conflicts",
    "verify_bound",
]
