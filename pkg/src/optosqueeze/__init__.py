"""Steady-state mechanical squeezing in a hybrid atom-cavity-optomechanical system."""

from .effective import optimal_point, run_pipeline
from .model import PRESETS, ParameterError, PhysicalParams, preset
from .steady_state import solve_steady_amplitudes

__all__ = [
    "PRESETS",
    "ParameterError",
    "PhysicalParams",
    "optimal_point",
    "preset",
    "run_pipeline",
    "solve_steady_amplitudes",
]
__version__ = "0.1.0"
