"""Hydrostatic Euler and semi-Lagrangian solvers with blow-up diagnostics."""

from .grid import ChannelGrid, TorusGrid, poisson_inverse_torus
from .hydrostatic import FlowState, RunSettings, StopReason, run, step_rk4

__all__ = [
    "ChannelGrid", "TorusGrid", "poisson_inverse_torus",
    "FlowState", "RunSettings", "StopReason", "run", "step_rk4",
]
__version__ = "0.1.0"
