"""Quantum graph neural network for water-molecule forces and energy.

A 9-qubit statevector simulator drives a data-reuploading circuit whose
Pauli-X/Y/Z readouts are the nine force components; the energy is a
sum-pooled linear function of per-axis force sums.

Set ``QGNN_DISABLE_NUMBA=1`` to run the pure-numpy kernels instead of the
numba ones, and ``QGNN_ENGINE=dense`` to simulate the full 512-amplitude
state rather than the per-axis factorisation.
"""

from .kernels import BACKEND_NAME
from .model import ModelParams, ScaledSample, WireLayout
from .sim import GateKind, StateVector, apply_gate, expectation_pauli, zero_state

__version__ = "0.1.0"

__all__ = [
    "BACKEND_NAME",
    "GateKind",
    "ModelParams",
    "ScaledSample",
    "StateVector",
    "WireLayout",
    "apply_gate",
    "expectation_pauli",
    "zero_state",
    "__version__",
]
