"""Exact simulation and analysis of busy beaver Turing machines."""
from .machine import Configuration, MachineSpec, Status, format_machine, parse_config, parse_machine, run_direct
from .accel import run_accelerated

__version__ = "0.1.0"

__all__ = [
    "Configuration",
    "MachineSpec",
    "Status",
    "format_machine",
    "parse_config",
    "parse_machine",
    "run_accelerated",
    "run_direct",
]
