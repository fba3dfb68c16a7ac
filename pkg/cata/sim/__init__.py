from cata.sim.sim import (
    TRACE_COLUMNS,
    AvoidanceOutcome,
    IncidentTracker,
    RobotState,
    SimState,
    TrialMetrics,
    reactive_avoidance,
    run_trial,
    step,
)

__all__ = [
    "TRACE_COLUMNS",
    "AvoidanceOutcome",
    "IncidentTracker",
    "RobotState",
    "SimState",
    "TrialMetrics",
    "reactive_avoidance",
    "run_trial",
    "step",
]
