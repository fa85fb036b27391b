"""Geodesic complexity of unitaries under a weight-penalized metric."""

__version__ = "0.1.0"

from .continuation import ContinuationConfig, ContinuationTrace, export_controls, run_continuation
from .geodesic import analytic_reference, evolve_geodesic, straight_line_complexity
from .pauli import PauliString, PenaltyParams
from .targets import compile_circuit, qft_matrix, random_circuit

__all__ = [
    "ContinuationConfig",
    "ContinuationTrace",
    "PauliString",
    "PenaltyParams",
    "analytic_reference",
    "compile_circuit",
    "evolve_geodesic",
    "export_controls",
    "qft_matrix",
    "random_circuit",
    "run_continuation",
    "straight_line_complexity",
]
