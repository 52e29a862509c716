"""Compile linear-optical unitaries onto a dual-loop time-bin circuit and simulate the output."""

__version__ = "0.1.0"

from .decomp import DecompositionPlan, TParams, decompose, reconstruct
from .errors import DualLoopError, NumericalError, RoutingError, ValidationError
from .gaussian import LossModel, simulate
from .homodyne import estimate_covariance, mode_function, sample_quadratures
from .linops import random_unitary, symplectic_from_unitary
from .loopcompiler import (ControlTimeline, TimeBin, compile_plan, round_trip_counts,
                           timeline_to_unitary, verify)
from .metrics import gaussian_fidelity, inseparability
from .presets import PRESET_NAMES, preset_timeline

__all__ = [
    "ControlTimeline", "DecompositionPlan", "DualLoopError", "LossModel", "NumericalError",
    "PRESET_NAMES", "RoutingError", "TParams", "TimeBin", "ValidationError", "compile_plan",
    "decompose", "estimate_covariance", "gaussian_fidelity", "inseparability", "mode_function",
    "preset_timeline", "random_unitary", "reconstruct", "round_trip_counts", "sample_quadratures",
    "simulate", "symplectic_from_unitary", "timeline_to_unitary", "verify",
]
