import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles as orc
from qgnn.sim import (
    N_QUBITS,
    GateKind,
    StateVector,
    apply_gate,
    expectation_pauli,
    fidelity,
    fidelities,
    gate_matrix,
    zero_state,
)

ANGLES = st.floats(-20.0, 20.0, allow_nan=False)
PARAMETRIC = [GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.XX, GateKind.YY, GateKind.ZZ]


def _oracle_matrix(kind, theta):
    return {
        GateKind.PAULI_X: orc.X,
        GateKind.PAULI_Y: orc.Y,
        GateKind.PAULI_Z: orc.Z,
        GateKind.HADAMARD: orc.H,
        GateKind.RX: orc.rot("x", theta),
        GateKind.RY: orc.rot("y", theta),
        GateKind.RZ: orc.rot("z", theta),
        GateKind.XX: orc.ising("x", theta),
        GateKind.YY: orc.ising("y", theta),
        GateKind.ZZ: orc.ising("z", theta),
        GateKind.SWAP: orc.SWAP,
    }[kind]


@pytest.mark.parametrize("kind", list(GateKind))
@given(theta=ANGLES)
def test_gate_matrix_unitary_and_equal_to_pauli_exponential(kind, theta):
    u = gate_matrix(kind, theta)
    assert np.max(np.abs(u.conj().T @ u - np.eye(len(u)))) < 1e-12
    np.testing.assert_allclose(u, _oracle_matrix(kind, theta), atol=1e-14)


def test_rx_entries_written_out():
    t = 0.73
    u = gate_matrix(GateKind.RX, t)
    assert u[0, 0] == pytest.approx(math.cos(t / 2))
    assert u[0, 1] == pytest.approx(-1j * math.sin(t / 2))


def test_gate_kind_metadata():
    assert GateKind.XX.n_wires == 2 and GateKind.SWAP.n_wires == 2
    assert GateKind.RX.n_wires == 1
    assert GateKind.RZ.parametric and not GateKind.HADAMARD.parametric
    assert not GateKind.SWAP.parametric


def test_zero_state():
    s = zero_state()
    assert s.amplitudes.shape == (512,)
    assert s.norm() == 1.0
    assert all(expectation_pauli(s, "z", w) == 1.0 for w in range(N_QUBITS))
    assert fidelity(s, zero_state()) == 1.0


def test_bit_ordering_wire_is_index_bit():
    for w in range(N_QUBITS):
        s = apply_gate(zero_state(), GateKind.PAULI_X, w)
        assert abs(s.amplitudes[1 << w]) == 1.0


def test_hadamard_on_zero():
    s = apply_gate(zero_state(1), GateKind.HADAMARD, 0)
    np.testing.assert_allclose(s.amplitudes, [1 / math.sqrt(2)] * 2, atol=1e-15)


def test_xx_half_pi_is_maximally_entangling():
    s = apply_gate(zero_state(2), GateKind.XX, (0, 1), math.pi / 2)
    np.testing.assert_allclose(s.amplitudes, np.array([1, 0, 0, -1j]) / math.sqrt(2), atol=1e-15)
    # reduced state of either qubit is maximally mixed
    m = s.amplitudes.reshape(2, 2)
    np.testing.assert_allclose(m @ m.conj().T, np.eye(2) / 2, atol=1e-15)


@pytest.mark.parametrize("kind, plus_input", [(GateKind.YY, False), (GateKind.ZZ, True)])
def test_other_ising_gates_at_half_pi(kind, plus_input):
    # ZZ is diagonal, so it entangles only from |++>, not from |00>
    s = zero_state(2)
    if plus_input:
        apply_gate(s, GateKind.HADAMARD, 0)
        apply_gate(s, GateKind.HADAMARD, 1)
    apply_gate(s, kind, (0, 1), math.pi / 2)
    m = s.amplitudes.reshape(2, 2)
    np.testing.assert_allclose(m @ m.conj().T, np.eye(2) / 2, atol=1e-15)


def test_swap_twice_restores(rng):
    psi = orc.random_state(rng, 9)
    s = StateVector(psi.copy())
    apply_gate(s, GateKind.SWAP, (2, 7))
    apply_gate(s, GateKind.SWAP, (2, 7))
    assert np.max(np.abs(s.amplitudes - psi)) < 1e-12


@pytest.mark.parametrize("wires", [(9,), (-1,), (3, 3), (0, 1, 2)])
def test_bad_wires_rejected(wires):
    gate = GateKind.XX if len(wires) != 1 else GateKind.RX
    with pytest.raises(ValueError):
        apply_gate(zero_state(), gate, wires, 0.1)


def test_wrong_arity_rejected():
    with pytest.raises(ValueError, match="acts on 2"):
        apply_gate(zero_state(), GateKind.SWAP, 1)
    with pytest.raises(ValueError):
        expectation_pauli(zero_state(), "z", 9)


def test_state_shape_checked():
    with pytest.raises(ValueError):
        StateVector(np.zeros(8), qubit_count=9)


def test_plus_state_x_expectation():
    s = apply_gate(zero_state(), GateKind.HADAMARD, 4)
    assert expectation_pauli(s, "x", 4) == pytest.approx(1.0, abs=1e-15)


def test_rx_y_expectation_against_2x2_algebra(rng):
    for theta in rng.uniform(-10, 10, 20):
        s = apply_gate(zero_state(), GateKind.RX, 5, theta)
        psi = orc.rot("x", theta) @ np.array([1, 0])
        want = np.real(np.vdot(psi, orc.Y @ psi))
        assert want == pytest.approx(-math.sin(theta), abs=1e-14)
        assert expectation_pauli(s, "y", 5) == pytest.approx(want, abs=1e-13)


def test_fidelity_orthogonal_and_symmetric(rng):
    ones = zero_state()
    for w in range(N_QUBITS):
        apply_gate(ones, GateKind.PAULI_X, w)
    assert fidelity(zero_state(), ones) == 0.0
    a, b = StateVector(orc.random_state(rng, 9)), StateVector(orc.random_state(rng, 9))
    assert fidelity(a, b) == pytest.approx(fidelity(b, a), abs=1e-15)
    assert fidelity(a, a) == pytest.approx(1.0, abs=1e-14)
    assert fidelities(a.amplitudes[None], b.amplitudes[None])[0] == pytest.approx(fidelity(a, b))


def test_product_state_fidelity_factorises(rng):
    ta, tb = rng.uniform(-3, 3, (2, N_QUBITS, 2))
    a, b = zero_state(), zero_state()
    per_qubit = 1.0
    for w in range(N_QUBITS):
        apply_gate(a, GateKind.RY, w, ta[w, 0])
        apply_gate(a, GateKind.RZ, w, ta[w, 1])
        apply_gate(b, GateKind.RY, w, tb[w, 0])
        apply_gate(b, GateKind.RZ, w, tb[w, 1])
        qa = orc.rot("z", ta[w, 1]) @ orc.rot("y", ta[w, 0]) @ np.array([1, 0])
        qb = orc.rot("z", tb[w, 1]) @ orc.rot("y", tb[w, 0]) @ np.array([1, 0])
        per_qubit *= abs(np.vdot(qa, qb)) ** 2
    assert fidelity(a, b) == pytest.approx(per_qubit, abs=1e-13)


GATE_STEP = st.tuples(
    st.sampled_from(list(GateKind)),
    st.integers(0, N_QUBITS - 1),
    st.integers(0, N_QUBITS - 2),
    ANGLES,
)


def _apply_step(state, step):
    kind, a, b, theta = step
    if kind.n_wires == 2:
        b += b >= a
        apply_gate(state, kind, (a, b), theta)
    else:
        apply_gate(state, kind, a, theta)


@given(steps=st.lists(GATE_STEP, max_size=200))
def test_norm_preserved_by_any_gate_sequence(steps):
    s = zero_state()
    for step in steps:
        _apply_step(s, step)
    assert abs(s.norm() - 1.0) < 1e-10
    for w in range(N_QUBITS):
        for ax in "xyz":
            assert -1.0 - 1e-12 <= expectation_pauli(s, ax, w) <= 1.0 + 1e-12


@pytest.mark.parametrize("kind", [GateKind.RX, GateKind.RY, GateKind.RZ])
@given(t1=ANGLES, t2=ANGLES)
def test_rotation_additivity(kind, t1, t2):
    psi = orc.random_state(np.random.default_rng(1), 9)
    a = StateVector(psi.copy())
    apply_gate(a, kind, 3, t1)
    apply_gate(a, kind, 3, t2)
    b = apply_gate(StateVector(psi.copy()), kind, 3, t1 + t2)
    assert np.max(np.abs(a.amplitudes - b.amplitudes)) < 1e-12


@pytest.mark.parametrize("kind", PARAMETRIC)
def test_zero_angle_is_identity(kind, rng):
    psi = orc.random_state(rng, 9)
    s = StateVector(psi.copy())
    apply_gate(s, kind, (1, 6) if kind.n_wires == 2 else 6, 0.0)
    assert np.max(np.abs(s.amplitudes - psi)) < 1e-12


@given(seed=st.integers(0, 2**32 - 1), w1=st.integers(0, 8), w2=st.integers(0, 7))
def test_swap_exchanges_expectations(seed, w1, w2):
    w2 += w2 >= w1
    s = StateVector(orc.random_state(np.random.default_rng(seed), 9))
    before = {ax: expectation_pauli(s, ax, w2) for ax in "xyz"}
    apply_gate(s, GateKind.SWAP, (w1, w2))
    for ax in "xyz":
        assert expectation_pauli(s, ax, w1) == pytest.approx(before[ax], abs=1e-12)


def test_three_qubit_sequence_matches_8x8_products(rng):
    psi = orc.random_state(rng, 3)
    s = StateVector(psi.copy(), qubit_count=3)
    for _ in range(40):
        kind = GateKind(int(rng.integers(0, 11)))
        theta = rng.uniform(-6, 6)
        if kind.n_wires == 2:
            wires = [int(w) for w in rng.choice(3, size=2, replace=False)]
        else:
            wires = [int(rng.integers(0, 3))]
        apply_gate(s, kind, tuple(wires), theta)
        psi = orc.embed(_oracle_matrix(kind, theta), wires, 3) @ psi
    assert np.max(np.abs(s.amplitudes - psi)) < 1e-12
