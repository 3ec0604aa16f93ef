"""Max-Weight switched-queue simulation and heavy-tail delay analysis."""

from .arrivals import ArrivalSpec, bernoulli, bernoulli_zeta, calibrate_rate
from .config import Probes, SimConfig, parse_config
from .core import QueueState, Schedule, ScheduleSet, default_schedule_set, run_steps
from .errors import ConfigurationError, DomainError, TraceOrderError
from .experiment import run_experiment
from .fluid import compare_to_simulation, fluid_burst
from .mg1 import fit_scaling, simulate_workload
from .region import classify, in_stability_region

__version__ = "0.1.0"

__all__ = [
    "ArrivalSpec",
    "ConfigurationError",
    "DomainError",
    "Probes",
    "QueueState",
    "Schedule",
    "ScheduleSet",
    "SimConfig",
    "TraceOrderError",
    "bernoulli",
    "bernoulli_zeta",
    "calibrate_rate",
    "classify",
    "compare_to_simulation",
    "default_schedule_set",
    "fit_scaling",
    "fluid_burst",
    "in_stability_region",
    "parse_config",
    "run_experiment",
    "run_steps",
    "simulate_workload",
]
