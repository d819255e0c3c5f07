__all__ = [
    "FINITE",
    "UNBOUNDED",
    "ReplicationMetrics",
    "SimConfig",
    "SimMetrics",
    "Trajectory",
    "overflow_experiment",
    "overflow_probability",
    "random_walk_endpoints",
    "run",
    "trajectory",
]

from encrelay.simulator.engine import (
    FINITE as FINITE,
    UNBOUNDED as UNBOUNDED,
    ReplicationMetrics as ReplicationMetrics,
    SimConfig as SimConfig,
    SimMetrics as SimMetrics,
    Trajectory as Trajectory,
    run as run,
    trajectory as trajectory,
)
from encrelay.simulator.overflow import (
    overflow_experiment as overflow_experiment,
    overflow_probability as overflow_probability,
    random_walk_endpoints as random_walk_endpoints,
)
