"""Desk-scale quantum computing toolkit: state-vector and density-matrix simulation,
noise channels, error-correcting codes, variational algorithms and zero-noise extrapolation."""

from __future__ import annotations

__version__ = "0.1.0"

from .circuit import Circuit, load_circuit, parse_circuit, qft, run_and_measure, run_density, run_statevector, unitary_of
from .density import DensityMatrix
from .gates import Gate, HermitianGenerator
from .measure import Observable
from .state import StateVector

__all__ = [
    "Circuit",
    "DensityMatrix",
    "Gate",
    "HermitianGenerator",
    "Observable",
    "StateVector",
    "load_circuit",
    "parse_circuit",
    "qft",
    "run_and_measure",
    "run_density",
    "run_statevector",
    "unitary_of",
]
