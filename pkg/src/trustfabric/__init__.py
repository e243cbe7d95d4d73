from .analyze import analyze
from .engine import SimulationJob, load_scenario, simulate
from .fabric import Fabric, MemoryMap
from .policy import AccessKind, ApuPolicy, DpuPolicy, Permission, apu_check, dpu_check, range_of
from .scenario import parse, render, validate

__all__ = [
    "AccessKind",
    "ApuPolicy",
    "DpuPolicy",
    "Permission",
    "range_of",
    "apu_check",
    "dpu_check",
    "Fabric",
    "MemoryMap",
    "parse",
    "render",
    "validate",
    "analyze",
    "load_scenario",
    "simulate",
    "SimulationJob",
]
