from .auction import (
    ALGORITHMS,
    AuctionResult,
    cata_round,
    count_path_crossings,
    local_highest_bid,
    run_algorithm,
    run_cata,
    run_cbaa,
    run_classical_optimal,
    run_greedy_centralized,
    run_random,
)

__all__ = [
    "ALGORITHMS",
    "AuctionResult",
    "cata_round",
    "count_path_crossings",
    "local_highest_bid",
    "run_algorithm",
    "run_cata",
    "run_cbaa",
    "run_classical_optimal",
    "run_greedy_centralized",
    "run_random",
]
