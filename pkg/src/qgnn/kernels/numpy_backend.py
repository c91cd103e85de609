"""Pure-numpy gate kernels, vectorised over a batch of statevectors.

States are ``(B, 2**n)`` complex128 arrays. Wire ``w`` is bit ``w`` of the
amplitude index (wire 0 is the least-significant bit).
"""

import numpy as np

from .codes import (
    HADAMARD,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    RX,
    RY,
    RZ,
    SWAP,
    XX,
    YY,
    ZZ,
)

_SQ2 = 1.0 / np.sqrt(2.0)


def single_qubit_matrices(kind, angles):
    """Return ``(B, 2, 2)`` matrices for a one-qubit gate at the given angles."""
    angles = np.asarray(angles, dtype=np.float64)
    m = np.zeros(angles.shape + (2, 2), dtype=np.complex128)
    if kind == PAULI_X:
        m[..., 0, 1] = 1.0
        m[..., 1, 0] = 1.0
    elif kind == PAULI_Y:
        m[..., 0, 1] = -1j
        m[..., 1, 0] = 1j
    elif kind == PAULI_Z:
        m[..., 0, 0] = 1.0
        m[..., 1, 1] = -1.0
    elif kind == HADAMARD:
        m[..., 0, 0] = _SQ2
        m[..., 0, 1] = _SQ2
        m[..., 1, 0] = _SQ2
        m[..., 1, 1] = -_SQ2
    else:
        c = np.cos(angles / 2)
        s = np.sin(angles / 2)
        if kind == RX:
            m[..., 0, 0] = c
            m[..., 0, 1] = -1j * s
            m[..., 1, 0] = -1j * s
            m[..., 1, 1] = c
        elif kind == RY:
            m[..., 0, 0] = c
            m[..., 0, 1] = -s
            m[..., 1, 0] = s
            m[..., 1, 1] = c
        elif kind == RZ:
            m[..., 0, 0] = np.exp(-0.5j * angles)
            m[..., 1, 1] = np.exp(0.5j * angles)
        else:
            raise ValueError(f"not a single-qubit gate code: {kind}")
    return m


def _apply_1q(states, wire, mats):
    b, dim = states.shape
    v = states.reshape(b, dim >> (wire + 1), 2, 1 << wire)
    a0 = v[:, :, 0, :].copy()
    a1 = v[:, :, 1, :]
    m = mats[:, :, :, None, None]
    v[:, :, 0, :] = m[:, 0, 0] * a0 + m[:, 0, 1] * a1
    v[:, :, 1, :] = m[:, 1, 0] * a0 + m[:, 1, 1] * a1


def _apply_2q(states, kind, wa, wb, angles):
    b, dim = states.shape
    lo, hi = min(wa, wb), max(wa, wb)
    v = states.reshape(b, dim >> (hi + 1), 2, 1 << (hi - lo - 1), 2, 1 << lo)
    # the gates in this set are symmetric under exchanging their two wires
    p00 = v[:, :, 0, :, 0, :].copy()
    p01 = v[:, :, 0, :, 1, :].copy()
    p10 = v[:, :, 1, :, 0, :].copy()
    p11 = v[:, :, 1, :, 1, :].copy()
    if kind == SWAP:
        v[:, :, 0, :, 1, :] = p10
        v[:, :, 1, :, 0, :] = p01
        return
    shape = (b, 1, 1, 1)
    half = np.asarray(angles, dtype=np.float64).reshape(shape) / 2
    c = np.cos(half)
    s = np.sin(half)
    if kind == XX:
        v[:, :, 0, :, 0, :] = c * p00 - 1j * s * p11
        v[:, :, 1, :, 1, :] = c * p11 - 1j * s * p00
        v[:, :, 0, :, 1, :] = c * p01 - 1j * s * p10
        v[:, :, 1, :, 0, :] = c * p10 - 1j * s * p01
    elif kind == YY:
        v[:, :, 0, :, 0, :] = c * p00 + 1j * s * p11
        v[:, :, 1, :, 1, :] = c * p11 + 1j * s * p00
        v[:, :, 0, :, 1, :] = c * p01 - 1j * s * p10
        v[:, :, 1, :, 0, :] = c * p10 - 1j * s * p01
    elif kind == ZZ:
        even = np.exp(-1j * half)
        odd = np.exp(1j * half)
        v[:, :, 0, :, 0, :] = even * p00
        v[:, :, 1, :, 1, :] = even * p11
        v[:, :, 0, :, 1, :] = odd * p01
        v[:, :, 1, :, 0, :] = odd * p10
    else:
        raise ValueError(f"not a two-qubit gate code: {kind}")


def apply_op(states, kind, wa, wb, angles):
    """Apply one gate in place to every state of the batch.

    ``angles`` is a scalar or a length-``B`` array (ignored for fixed gates).
    """
    angles = np.broadcast_to(np.asarray(angles, dtype=np.float64), (states.shape[0],))
    if wb < 0:
        _apply_1q(states, wa, single_qubit_matrices(kind, angles))
    else:
        _apply_2q(states, kind, wa, wb, angles)


def run_tape(states, kinds, wa, wb, angles, start=0, stop=None):
    """Apply gates ``start:stop`` of a tape; ``angles`` has shape ``(B, G)``."""
    stop = len(kinds) if stop is None else stop
    for g in range(start, stop):
        apply_op(states, kinds[g], wa[g], wb[g], angles[:, g])
    return states


def expectations(states, axes, wires):
    """Pauli expectations, shape ``(B, M)``, for measurement lists ``axes``/``wires``."""
    b, dim = states.shape
    out = np.empty((b, len(axes)), dtype=np.float64)
    for j, (axis, wire) in enumerate(zip(axes, wires)):
        v = states.reshape(b, dim >> (wire + 1), 2, 1 << wire)
        a0 = v[:, :, 0, :]
        a1 = v[:, :, 1, :]
        if axis == 0:
            out[:, j] = 2.0 * np.sum(np.real(np.conj(a0) * a1), axis=(1, 2))
        elif axis == 1:
            out[:, j] = 2.0 * np.sum(np.imag(np.conj(a0) * a1), axis=(1, 2))
        else:
            out[:, j] = np.sum(np.abs(a0) ** 2 - np.abs(a1) ** 2, axis=(1, 2))
    return out


def run_batch(init, kinds, wa, wb, angles, axes, wires):
    states = np.repeat(init[None, :], angles.shape[0], axis=0)
    run_tape(states, kinds, wa, wb, angles)
    return expectations(states, axes, wires)


def final_states(init, kinds, wa, wb, angles):
    states = np.repeat(init[None, :], angles.shape[0], axis=0)
    return run_tape(states, kinds, wa, wb, angles)


def shift_jacobian(init, kinds, wa, wb, angles, param_gates, axes, wires):
    """Expectations and their derivatives w.r.t. each listed gate angle.

    Every listed gate must be generated by a single Pauli string, so the
    two-term shift by +-pi/2 is exact. Returns ``(vals (B, M), jac (B, M, P))``.
    """
    b, n_gates = angles.shape
    p = len(param_gates)
    # row 0: unshifted, rows 1..P: +pi/2 on gate p, rows P+1..2P: -pi/2
    expanded = np.repeat(angles[:, None, :], 2 * p + 1, axis=1)
    idx = np.arange(p)
    expanded[:, 1 + idx, param_gates] += np.pi / 2
    expanded[:, 1 + p + idx, param_gates] -= np.pi / 2
    vals = run_batch(
        init, kinds, wa, wb, expanded.reshape(-1, n_gates), axes, wires
    ).reshape(b, 2 * p + 1, -1)
    jac = 0.5 * (vals[:, 1 : p + 1, :] - vals[:, p + 1 :, :])
    return vals[:, 0, :], np.ascontiguousarray(jac.transpose(0, 2, 1))
