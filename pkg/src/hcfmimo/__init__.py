"""Monte Carlo simulator of hierarchical cell-free, cell-free and cellular massive MIMO."""

from .harness import (
    ExperimentResult,
    ExperimentSpec,
    Link,
    PowerMode,
    __version__,
    empirical_cdf,
    likely_rate,
    run_experiment,
    sum_throughput,
)
from .power_control import BisectionSettings, PowerAllocation, maxmin_downlink, maxmin_uplink
from .scenario import Architecture, Preset, ScenarioConfig, build_scenario

__all__ = [
    "Architecture",
    "BisectionSettings",
    "ExperimentResult",
    "ExperimentSpec",
    "Link",
    "PowerAllocation",
    "PowerMode",
    "Preset",
    "ScenarioConfig",
    "__version__",
    "build_scenario",
    "empirical_cdf",
    "likely_rate",
    "maxmin_downlink",
    "maxmin_uplink",
    "run_experiment",
    "sum_throughput",
]
