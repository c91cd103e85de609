"""The water-molecule QGNN circuit, post-processing and sum pooling.

One qubit per (atom, axis) coordinate. A complete layer is

    encoding  R_c(2 pi alpha_c) on every wire (Hadamard on z wires first, layer 1 only)
    edge      XX / YY / ZZ(2 pi d**n) across (O,H1), (O,H2), (H1,H2) for each axis
    embedding two trainable rotations R_i(2 pi theta) per wire, i != own axis,
              then SWAP(H1_c, H2_c) for every axis unless this is the last layer

and the raw outputs are <sigma_c> on wire (alpha, c).
"""

import os
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels
from .kernels import codes
from .sim import GateKind, N_QUBITS, apply_gate, expectation_pauli, zero_state

ATOMS = ("O", "H1", "H2")
AXES = ("x", "y", "z")
# D-tensor columns
PAIRS = ((0, 1), (0, 2), (1, 2))
THETAS_PER_LAYER = 18
N_CLASSICAL = 14

_ROT = (GateKind.RX, GateKind.RY, GateKind.RZ)
_ISING = (GateKind.XX, GateKind.YY, GateKind.ZZ)
TWO_PI = 2.0 * np.pi


def _atom_index(atom):
    return ATOMS.index(atom) if isinstance(atom, str) else int(atom)


def _axis_index(axis):
    return AXES.index(axis) if isinstance(axis, str) else int(axis)


@dataclass(frozen=True)
class WireLayout:
    """Maps (atom, axis) to a wire; ``wires[3 * atom + axis]``."""

    wires: tuple = tuple(range(N_QUBITS))

    def __post_init__(self):
        w = tuple(int(x) for x in self.wires)
        if len(w) != 9 or sorted(w) != list(range(N_QUBITS)):
            raise ValueError(f"wire layout must be a permutation of 0..8, got {w}")
        object.__setattr__(self, "wires", w)

    def wire(self, atom, axis):
        return self.wires[3 * _atom_index(atom) + _axis_index(axis)]

    def theta_slots(self):
        """(atom, axis, rotation axis) consumed by theta index k = 0..17."""
        slots = []
        for a in range(3):
            for c in range(3):
                slots.extend((a, c, r) for r in range(3) if r != c)
        return slots

    def to_dict(self):
        return {
            f"{ATOMS[a]}_{AXES[c]}": self.wire(a, c) for a in range(3) for c in range(3)
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d[f"{ATOMS[a]}_{AXES[c]}"] for a in range(3) for c in range(3)))


DEFAULT_LAYOUT = WireLayout()


@dataclass
class ModelParams:
    thetas: np.ndarray  # (n_layers, 18)
    force_scales: np.ndarray = field(default_factory=lambda: np.ones(9))
    force_bias: float = 0.0
    pool_scales: np.ndarray = field(default_factory=lambda: np.ones(3))
    pool_bias: float = 0.0

    def __post_init__(self):
        self.thetas = np.array(self.thetas, dtype=np.float64).reshape(-1, THETAS_PER_LAYER)
        self.force_scales = np.array(self.force_scales, dtype=np.float64).reshape(9)
        self.pool_scales = np.array(self.pool_scales, dtype=np.float64).reshape(3)
        self.force_bias = float(self.force_bias)
        self.pool_bias = float(self.pool_bias)
        if self.n_layers < 1:
            raise ValueError("a model needs at least one layer")

    @property
    def n_layers(self):
        return self.thetas.shape[0]

    @property
    def n_quantum(self):
        return self.thetas.size

    @property
    def n_params(self):
        return self.thetas.size + N_CLASSICAL

    @classmethod
    def zeros(cls, n_layers):
        return cls(np.zeros((n_layers, THETAS_PER_LAYER)))

    def to_vector(self):
        """Flat layout: thetas (row-major), 9 force scales, force bias, 3 pool scales, pool bias."""
        return np.concatenate(
            [
                self.thetas.ravel(),
                self.force_scales,
                [self.force_bias],
                self.pool_scales,
                [self.pool_bias],
            ]
        )

    @classmethod
    def from_vector(cls, vec, n_layers):
        vec = np.asarray(vec, dtype=np.float64)
        nq = n_layers * THETAS_PER_LAYER
        if vec.shape != (nq + N_CLASSICAL,):
            raise ValueError(
                f"expected {nq + N_CLASSICAL} parameters for {n_layers} layers, got {vec.shape}"
            )
        return cls(
            vec[:nq].reshape(n_layers, THETAS_PER_LAYER),
            vec[nq : nq + 9],
            vec[nq + 9],
            vec[nq + 10 : nq + 13],
            vec[nq + 13],
        )

    def copy(self):
        return ModelParams.from_vector(self.to_vector(), self.n_layers)


@dataclass
class ScaledSample:
    coords: np.ndarray  # 9, atom-major (O, H1, H2) x (x, y, z), in [0, 1]
    distances: np.ndarray  # 3x3, rows = axes, columns = PAIRS, in [0, 1]
    forces: np.ndarray | None = None  # 9, in [-1, 1]
    energy: float | None = None

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64).reshape(9)
        self.distances = np.asarray(self.distances, dtype=np.float64).reshape(3, 3)
        if self.forces is not None:
            self.forces = np.asarray(self.forces, dtype=np.float64).reshape(9)
        if self.energy is not None:
            self.energy = float(self.energy)

    @property
    def labelled(self):
        return self.forces is not None and self.energy is not None


def _check_unit(name, values):
    values = np.asarray(values)
    if np.any(values < 0.0) or np.any(values > 1.0) or not np.all(np.isfinite(values)):
        raise ValueError(f"{name} must lie in [0, 1]")


# --- gate-by-gate layers ----------------------------------------------------


def apply_encoding_layer(state, sample, is_first_layer, layout=DEFAULT_LAYOUT):
    _check_unit("coordinates", sample.coords)
    if is_first_layer:
        for a in range(3):
            apply_gate(state, GateKind.HADAMARD, layout.wire(a, 2))
    for a in range(3):
        for c in range(3):
            apply_gate(state, _ROT[c], layout.wire(a, c), TWO_PI * sample.coords[3 * a + c])
    return state


def apply_edge_layer(state, sample, layer_index, layout=DEFAULT_LAYOUT):
    if layer_index < 1:
        raise ValueError("edge-layer exponent must be >= 1")
    _check_unit("distance entries", sample.distances)
    for c in range(3):
        for col, (i, j) in enumerate(PAIRS):
            angle = TWO_PI * sample.distances[c, col] ** layer_index
            apply_gate(state, _ISING[c], (layout.wire(i, c), layout.wire(j, c)), angle)
    return state


def apply_embedding_layer(state, thetas, is_last_layer, layout=DEFAULT_LAYOUT):
    thetas = np.asarray(thetas, dtype=np.float64).ravel()
    if thetas.shape != (THETAS_PER_LAYER,):
        raise ValueError(f"embedding layer takes 18 angles, got {thetas.size}")
    for k, (a, c, r) in enumerate(layout.theta_slots()):
        apply_gate(state, _ROT[r], layout.wire(a, c), TWO_PI * thetas[k])
    if not is_last_layer:
        for c in range(3):
            apply_gate(state, GateKind.SWAP, (layout.wire(1, c), layout.wire(2, c)))
    return state


def circuit_state(sample, params, layout=DEFAULT_LAYOUT):
    """Final statevector, built layer by layer through :func:`apply_gate`."""
    state = zero_state()
    n = params.n_layers
    for layer in range(1, n + 1):
        apply_encoding_layer(state, sample, layer == 1, layout)
        apply_edge_layer(state, sample, layer, layout)
        apply_embedding_layer(state, params.thetas[layer - 1], layer == n, layout)
    return state


def measure_forces(state, layout=DEFAULT_LAYOUT):
    return np.array(
        [expectation_pauli(state, AXES[c], layout.wire(a, c)) for a in range(3) for c in range(3)]
    )


# --- compiled tape ------------------------------------------------------------

SRC_NONE, SRC_COORD, SRC_DIST, SRC_THETA = 0, 1, 2, 3


@dataclass(frozen=True)
class CircuitTape:
    """Flat gate list for the whole circuit, plus where each angle comes from.

    ``index`` is a coordinate index (0..8), a flattened D-tensor index
    ``3 * axis + pair`` or a flat theta index, depending on ``source``.
    """

    n_layers: int
    kinds: np.ndarray
    wa: np.ndarray
    wb: np.ndarray
    source: np.ndarray
    index: np.ndarray
    power: np.ndarray
    meas_axes: np.ndarray
    meas_wires: np.ndarray

    @property
    def n_gates(self):
        return len(self.kinds)

    @property
    def theta_gates(self):
        """Gate position of every theta, in flat theta order."""
        pos = np.flatnonzero(self.source == SRC_THETA)
        return pos[np.argsort(self.index[pos], kind="stable")]

    def angles(self, coords, distances, thetas):
        """Gate angles ``(B, G)``; ``thetas`` is flat ``(P,)`` or per-row ``(B, P)``."""
        coords = np.atleast_2d(coords)
        dists = np.asarray(distances, dtype=np.float64).reshape(coords.shape[0], 9)
        b = coords.shape[0]
        out = np.zeros((b, self.n_gates), dtype=np.float64)
        m = self.source == SRC_COORD
        out[:, m] = coords[:, self.index[m]]
        m = self.source == SRC_DIST
        out[:, m] = dists[:, self.index[m]] ** self.power[m]
        m = self.source == SRC_THETA
        thetas = np.asarray(thetas, dtype=np.float64)
        out[:, m] = thetas[..., self.index[m]]
        out *= TWO_PI
        return out


@lru_cache(maxsize=32)
def build_tape(n_layers, layout=DEFAULT_LAYOUT):
    rows = []

    def emit(kind, wa, wb=-1, source=SRC_NONE, index=-1, power=0):
        rows.append((int(kind), wa, wb, source, index, power))

    slots = layout.theta_slots()
    for layer in range(1, n_layers + 1):
        if layer == 1:
            for a in range(3):
                emit(GateKind.HADAMARD, layout.wire(a, 2))
        for a in range(3):
            for c in range(3):
                emit(_ROT[c], layout.wire(a, c), source=SRC_COORD, index=3 * a + c)
        for c in range(3):
            for col, (i, j) in enumerate(PAIRS):
                emit(
                    _ISING[c], layout.wire(i, c), layout.wire(j, c),
                    SRC_DIST, 3 * c + col, layer,
                )
        base = (layer - 1) * THETAS_PER_LAYER
        for k, (a, c, r) in enumerate(slots):
            emit(_ROT[r], layout.wire(a, c), source=SRC_THETA, index=base + k)
        if layer < n_layers:
            for c in range(3):
                emit(GateKind.SWAP, layout.wire(1, c), layout.wire(2, c))
    cols = [np.array(col, dtype=np.int64) for col in zip(*rows)]
    meas_axes = np.array([c for a in range(3) for c in range(3)], dtype=np.int64)
    meas_wires = np.array([layout.wire(a, c) for a in range(3) for c in range(3)], dtype=np.int64)
    for arr in (*cols, meas_axes, meas_wires):
        arr.setflags(write=False)
    return CircuitTape(n_layers, *cols, meas_axes, meas_wires)


def _zero_amplitudes(n_qubits=N_QUBITS):
    psi = np.zeros(1 << n_qubits, dtype=np.complex128)
    psi[0] = 1.0
    return psi


@dataclass(frozen=True)
class AxisGroup:
    """Sub-circuit acting only on the three wires of one axis.

    No gate couples wires of different axes (XX/YY/ZZ and SWAP stay inside an
    axis), so the 9-qubit state is the product of three 3-qubit states and
    each group can be simulated on 8 amplitudes. Local wire = atom index.
    """

    axis: int
    gates: np.ndarray  # positions in the full tape
    kinds: np.ndarray
    wa: np.ndarray
    wb: np.ndarray
    theta_gates: np.ndarray  # local positions of trainable gates
    theta_index: np.ndarray  # flat theta index of each
    outputs: np.ndarray  # output slots 3 * atom + axis


@lru_cache(maxsize=32)
def axis_groups(n_layers, layout=DEFAULT_LAYOUT):
    tape = build_tape(n_layers, layout)
    atom_of = {}
    axis_of = {}
    for a in range(3):
        for c in range(3):
            atom_of[layout.wire(a, c)] = a
            axis_of[layout.wire(a, c)] = c
    groups = []
    for c in range(3):
        gates = np.array(
            [g for g in range(tape.n_gates) if axis_of[int(tape.wa[g])] == c], dtype=np.int64
        )
        wa = np.array([atom_of[int(w)] for w in tape.wa[gates]], dtype=np.int64)
        wb = np.array([atom_of[int(w)] if w >= 0 else -1 for w in tape.wb[gates]], dtype=np.int64)
        local = np.flatnonzero(tape.source[gates] == SRC_THETA)
        order = np.argsort(tape.index[gates][local], kind="stable")
        groups.append(
            AxisGroup(
                c, gates, tape.kinds[gates], wa, wb, local[order],
                tape.index[gates][local][order], np.arange(3, dtype=np.int64) * 3 + c,
            )
        )
    return tuple(groups)


ENGINES = ("factored", "dense")
DEFAULT_ENGINE = os.environ.get("QGNN_ENGINE", "factored")

_GROUP_AXES = np.zeros(3, dtype=np.int64)
_GROUP_WIRES = np.arange(3, dtype=np.int64)


def _engine(engine):
    engine = engine or DEFAULT_ENGINE
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}; choose from {ENGINES}")
    return engine


def forward_batch(coords, distances, params, layout=DEFAULT_LAYOUT, engine=None):
    """Raw forces ``(B, 9)`` for arrays of scaled coordinates and D tensors."""
    tape = build_tape(params.n_layers, layout)
    angles = tape.angles(coords, distances, params.thetas.ravel())
    if _engine(engine) == "dense":
        return kernels.run_batch(
            _zero_amplitudes(), tape.kinds, tape.wa, tape.wb, angles,
            tape.meas_axes, tape.meas_wires,
        )
    out = np.empty((angles.shape[0], 9), dtype=np.float64)
    for grp in axis_groups(params.n_layers, layout):
        out[:, grp.outputs] = kernels.run_batch(
            _zero_amplitudes(3), grp.kinds, grp.wa, grp.wb,
            np.ascontiguousarray(angles[:, grp.gates]),
            _GROUP_AXES + grp.axis, _GROUP_WIRES,
        )
    return out


def forward(sample, params, layout=DEFAULT_LAYOUT, engine=None):
    _check_unit("coordinates", sample.coords)
    _check_unit("distance entries", sample.distances)
    return forward_batch(sample.coords[None], sample.distances[None], params, layout, engine)[0]


def final_states_batch(coords, distances, thetas, n_layers, layout=DEFAULT_LAYOUT):
    """Final 9-qubit statevectors ``(B, 512)``; ``thetas`` may be flat or per-row."""
    tape = build_tape(n_layers, layout)
    angles = tape.angles(coords, distances, thetas)
    return kernels.final_states(_zero_amplitudes(), tape.kinds, tape.wa, tape.wb, angles)


def raw_jacobian_batch(coords, distances, params, layout=DEFAULT_LAYOUT, engine=None):
    """Raw forces ``(B, 9)`` and d raw / d theta ``(B, 9, 18 N)`` by parameter shift.

    Each theta enters one rotation at angle ``2 pi theta``; the +-pi/2 angle
    shift therefore picks up a chain factor of ``2 pi``.
    """
    tape = build_tape(params.n_layers, layout)
    angles = tape.angles(coords, distances, params.thetas.ravel())
    if _engine(engine) == "dense":
        vals, jac = kernels.shift_jacobian(
            _zero_amplitudes(), tape.kinds, tape.wa, tape.wb, angles,
            tape.theta_gates, tape.meas_axes, tape.meas_wires,
        )
        return vals, TWO_PI * jac
    b = angles.shape[0]
    vals = np.empty((b, 9), dtype=np.float64)
    jac = np.zeros((b, 9, params.n_quantum), dtype=np.float64)
    for grp in axis_groups(params.n_layers, layout):
        v, j = kernels.shift_jacobian(
            _zero_amplitudes(3), grp.kinds, grp.wa, grp.wb,
            np.ascontiguousarray(angles[:, grp.gates]), grp.theta_gates,
            _GROUP_AXES + grp.axis, _GROUP_WIRES,
        )
        vals[:, grp.outputs] = v
        jac[:, grp.outputs[:, None], grp.theta_index[None, :]] = j
    return vals, TWO_PI * jac


# --- classical head -------------------------------------------------------


def postprocess_forces(raw_forces, params):
    return np.asarray(raw_forces) * params.force_scales + params.force_bias


def axis_sums(forces):
    """Per-axis sums over atoms, ``(..., 3)``."""
    f = np.asarray(forces, dtype=np.float64)
    return f.reshape(f.shape[:-1] + (3, 3)).sum(axis=-2)


def pool_energy(forces, params):
    return axis_sums(forces) @ params.pool_scales + params.pool_bias


def predict(sample, params, pooling_source="predicted_forces", layout=DEFAULT_LAYOUT):
    """(forces, energy). Training pools the true forces, evaluation the predicted ones."""
    if pooling_source not in ("predicted_forces", "true_forces"):
        raise ValueError(f"unknown pooling source {pooling_source!r}")
    if pooling_source == "true_forces" and sample.forces is None:
        raise ValueError("true-force pooling requested on an unlabelled sample")
    forces = postprocess_forces(forward(sample, params, layout), params)
    pooled = sample.forces if pooling_source == "true_forces" else forces
    return forces, float(pool_energy(pooled, params))
