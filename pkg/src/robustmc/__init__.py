"""Robust matrix completion when whole columns are corrupted."""

from .experiments import GridSpec, RecoveryReport, run_grid, run_trial
from .operators import ColumnSet, ObservationMask, TangentSpace
from .solver import MODES, SolverConfig, SolverResult, extract_solution, solve
from .synth import CorruptionScheme, ProblemInstance, build_instance

__all__ = [
    "GridSpec", "RecoveryReport", "run_grid", "run_trial", "ColumnSet", "ObservationMask", "TangentSpace", "MODES",
    "SolverConfig", "SolverResult", "extract_solution", "solve", "CorruptionScheme", "ProblemInstance",
    "build_instance",
]
