"""Dense statevector simulation.

Bit ordering: wire ``w`` is bit ``w`` of the amplitude index, so wire 0 is
the least-significant bit. For a two-qubit gate on ``(wa, wb)`` the 4x4
matrix is indexed by ``2 * bit(wa) + bit(wb)``.
"""

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import kernels
from .kernels import codes

N_QUBITS = 9


class GateKind(IntEnum):
    PAULI_X = codes.PAULI_X
    PAULI_Y = codes.PAULI_Y
    PAULI_Z = codes.PAULI_Z
    HADAMARD = codes.HADAMARD
    RX = codes.RX
    RY = codes.RY
    RZ = codes.RZ
    XX = codes.XX
    YY = codes.YY
    ZZ = codes.ZZ
    SWAP = codes.SWAP

    @property
    def n_wires(self):
        return 2 if self.value in codes.TWO_QUBIT else 1

    @property
    def parametric(self):
        return self.value in codes.PARAMETRIC


_AXES = {"x": codes.AXIS_X, "y": codes.AXIS_Y, "z": codes.AXIS_Z}


def gate_matrix(kind, theta=0.0):
    """Dense matrix of a gate, written out exactly as the textbook definitions."""
    kind = GateKind(kind)
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    if kind is GateKind.PAULI_X:
        return np.array([[0, 1], [1, 0]], dtype=np.complex128)
    if kind is GateKind.PAULI_Y:
        return np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
    if kind is GateKind.PAULI_Z:
        return np.array([[1, 0], [0, -1]], dtype=np.complex128)
    if kind is GateKind.HADAMARD:
        return np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
    if kind is GateKind.RX:
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)
    if kind is GateKind.RY:
        return np.array([[c, -s], [s, c]], dtype=np.complex128)
    if kind is GateKind.RZ:
        return np.array(
            [[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=np.complex128
        )
    if kind is GateKind.SWAP:
        return np.array(
            [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128
        )
    if kind is GateKind.XX:
        return np.array(
            [
                [c, 0, 0, -1j * s],
                [0, c, -1j * s, 0],
                [0, -1j * s, c, 0],
                [-1j * s, 0, 0, c],
            ],
            dtype=np.complex128,
        )
    if kind is GateKind.YY:
        return np.array(
            [
                [c, 0, 0, 1j * s],
                [0, c, -1j * s, 0],
                [0, -1j * s, c, 0],
                [1j * s, 0, 0, c],
            ],
            dtype=np.complex128,
        )
    em = np.exp(-0.5j * theta)
    ep = np.exp(0.5j * theta)
    return np.diag([em, ep, ep, em]).astype(np.complex128)


@dataclass
class StateVector:
    amplitudes: np.ndarray
    qubit_count: int = N_QUBITS

    def __post_init__(self):
        self.amplitudes = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (1 << self.qubit_count,):
            raise ValueError(
                f"expected {1 << self.qubit_count} amplitudes for {self.qubit_count} "
                f"qubits, got shape {self.amplitudes.shape}"
            )

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def copy(self):
        return StateVector(self.amplitudes.copy(), self.qubit_count)


def zero_state(qubit_count=N_QUBITS):
    amps = np.zeros(1 << qubit_count, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(amps, qubit_count)


def _check_wire(state, wire):
    if not isinstance(wire, (int, np.integer)) or not 0 <= wire < state.qubit_count:
        raise ValueError(
            f"wire index {wire!r} out of range for a {state.qubit_count}-qubit state"
        )


def apply_gate(state, gate, wires, theta=0.0):
    """Apply ``gate`` to ``wires`` in place and return the same state."""
    gate = GateKind(gate)
    if isinstance(wires, (int, np.integer)):
        wires = (wires,)
    wires = tuple(wires)
    if len(wires) != gate.n_wires:
        raise ValueError(f"{gate.name} acts on {gate.n_wires} wire(s), got {wires}")
    for w in wires:
        _check_wire(state, w)
    if len(wires) == 2 and wires[0] == wires[1]:
        raise ValueError(f"{gate.name} needs two distinct wires, got {wires}")
    wa = int(wires[0])
    wb = int(wires[1]) if len(wires) == 2 else -1
    kernels.apply_op(state.amplitudes[None, :], int(gate), wa, wb, float(theta))
    return state


def expectation_pauli(state, axis, wire):
    """<psi| sigma_axis(wire) |psi> for axis in 'x', 'y', 'z'."""
    _check_wire(state, wire)
    code = _AXES[axis] if isinstance(axis, str) else int(axis)
    val = kernels.expectations(state.amplitudes[None, :], [code], [int(wire)])
    return float(val[0, 0])


def fidelity(a, b):
    if a.qubit_count != b.qubit_count:
        raise ValueError("fidelity needs states with the same qubit count")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


def fidelities(a, b):
    """Row-wise |<a_i|b_i>|^2 for two ``(S, D)`` amplitude arrays."""
    return np.abs(np.einsum("ij,ij->i", np.conj(a), b)) ** 2
