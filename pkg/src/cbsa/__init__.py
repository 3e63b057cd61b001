"""Component-based Simplex for a battery-powered rover.

Multi-rate synchronous components, assume-guarantee contracts with runtime
monitors, and Simplex decision modules that hand control from an advanced
controller to a verified baseline for energy safety, collision freedom and
mission completion.
"""

from .assurance import Contract, ContractMonitor, DischargeGraph, SimplexInstance, check_discharge, dm_decide
from .properties import RunResult, run_scenario
from .scenario import Scenario, ValidationError, load_scenario, shipped, validate
from .sync import Component, Composition, SimClock, ValueStore, compose, compose_all, run, step
from .system import assemble, discharge_report

__all__ = [
    "Component", "Composition", "SimClock", "ValueStore", "compose", "compose_all", "run", "step",
    "Contract", "ContractMonitor", "DischargeGraph", "SimplexInstance", "check_discharge", "dm_decide",
    "Scenario", "ValidationError", "load_scenario", "shipped", "validate",
    "assemble", "discharge_report", "RunResult", "run_scenario",
]

__version__ = "0.1.0"
