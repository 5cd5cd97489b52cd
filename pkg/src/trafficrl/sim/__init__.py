"""Queue-based traffic network simulator."""

from trafficrl.sim.arrivals import sample_interarrival, weibull_from_uniform, weibull_mean
from trafficrl.sim.network import (
    BUILTIN_SCENARIOS,
    DIRECTIONS,
    IntersectionNode,
    NetworkTopology,
    RoadSection,
    SimConfig,
    VehicleRecord,
    build_network,
    builtin_scenario,
    load_scenario,
)
from trafficrl.sim.simulator import (
    CycleResult,
    DelayReading,
    MetricsSample,
    Simulator,
    cycle_length,
    measure_density,
    metrics_header,
    metrics_row,
    run_cycle,
)

__all__ = [
    "BUILTIN_SCENARIOS",
    "DIRECTIONS",
    "CycleResult",
    "DelayReading",
    "IntersectionNode",
    "MetricsSample",
    "NetworkTopology",
    "RoadSection",
    "SimConfig",
    "Simulator",
    "VehicleRecord",
    "build_network",
    "builtin_scenario",
    "cycle_length",
    "load_scenario",
    "measure_density",
    "metrics_header",
    "metrics_row",
    "run_cycle",
    "sample_interarrival",
    "weibull_from_uniform",
    "weibull_mean",
]
