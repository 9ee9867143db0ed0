"""Deterministic runtime simulator producing logs with known metric values."""

from .generate import generate_workload
from .records import GroundTruth
from .runtime import SimulationError, SimulationResult, simulate
from .truth import export_truth
from .workload import CyclicFutureGraph, SpecError, WorkloadSpec, load_spec, spec_from_dict

__all__ = [
    "CyclicFutureGraph",
    "GroundTruth",
    "SimulationError",
    "SimulationResult",
    "SpecError",
    "WorkloadSpec",
    "export_truth",
    "generate_workload",
    "load_spec",
    "simulate",
    "spec_from_dict",
]
