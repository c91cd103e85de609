"""Numba-compiled gate kernels.

Same contract as :mod:`qgnn.kernels.numpy_backend`; the batch loops run
under ``prange`` with one private statevector per iteration.
"""

import math

import numba
import numpy as np
from numba import njit, prange

# try OpenMP before TBB: older TBB builds only produce a warning and a fallback
if numba.config.THREADING_LAYER == "default":
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

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

_SQ2 = 1.0 / math.sqrt(2.0)


@njit(cache=True, nogil=True)
def _apply_1q(psi, wire, m00, m01, m10, m11):
    stride = 1 << wire
    for base in range(0, psi.shape[0], 2 * stride):
        for i0 in range(base, base + stride):
            i1 = i0 + stride
            a0 = psi[i0]
            a1 = psi[i1]
            psi[i0] = m00 * a0 + m01 * a1
            psi[i1] = m10 * a0 + m11 * a1


@njit(cache=True, nogil=True)
def _apply_diag(psi, wire, d0, d1):
    stride = 1 << wire
    for base in range(0, psi.shape[0], 2 * stride):
        for i0 in range(base, base + stride):
            psi[i0] *= d0
            psi[i0 + stride] *= d1


@njit(cache=True, nogil=True)
def _apply_2q(psi, kind, wa, wb, angle):
    lo = 1 << min(wa, wb)
    hi = 1 << max(wa, wb)
    both = lo | hi
    c = math.cos(0.5 * angle)
    s = math.sin(0.5 * angle)
    even = complex(c, -s)
    odd = complex(c, s)
    mis = complex(0.0, -s)
    # sign of the |00><11| coupling: XX -> -i s, YY -> +i s
    corner = -mis if kind == YY else mis
    dim = psi.shape[0]
    for outer in range(0, dim, 2 * hi):
        for mid in range(outer, outer + hi, 2 * lo):
            for i00 in range(mid, mid + lo):
                i01 = i00 + lo
                i10 = i00 + hi
                i11 = i00 + both
                if kind == SWAP:
                    t = psi[i01]
                    psi[i01] = psi[i10]
                    psi[i10] = t
                elif kind == ZZ:
                    psi[i00] *= even
                    psi[i11] *= even
                    psi[i01] *= odd
                    psi[i10] *= odd
                else:
                    p00 = psi[i00]
                    p01 = psi[i01]
                    p10 = psi[i10]
                    p11 = psi[i11]
                    psi[i00] = c * p00 + corner * p11
                    psi[i11] = c * p11 + corner * p00
                    psi[i01] = c * p01 + mis * p10
                    psi[i10] = c * p10 + mis * p01


@njit(cache=True, nogil=True)
def apply_op_single(psi, kind, wa, wb, angle):
    if kind == PAULI_X:
        _apply_1q(psi, wa, 0j, 1 + 0j, 1 + 0j, 0j)
    elif kind == PAULI_Y:
        _apply_1q(psi, wa, 0j, -1j, 1j, 0j)
    elif kind == PAULI_Z:
        _apply_diag(psi, wa, 1 + 0j, -1 + 0j)
    elif kind == HADAMARD:
        h = complex(_SQ2, 0.0)
        _apply_1q(psi, wa, h, h, h, -h)
    elif kind == RX:
        c = complex(math.cos(0.5 * angle), 0.0)
        s = complex(0.0, -math.sin(0.5 * angle))
        _apply_1q(psi, wa, c, s, s, c)
    elif kind == RY:
        c = complex(math.cos(0.5 * angle), 0.0)
        s = complex(math.sin(0.5 * angle), 0.0)
        _apply_1q(psi, wa, c, -s, s, c)
    elif kind == RZ:
        c = math.cos(0.5 * angle)
        s = math.sin(0.5 * angle)
        _apply_diag(psi, wa, complex(c, -s), complex(c, s))
    else:
        _apply_2q(psi, kind, wa, wb, angle)


@njit(cache=True, nogil=True)
def _run_range(psi, kinds, wa, wb, angles, start, stop):
    for g in range(start, stop):
        apply_op_single(psi, kinds[g], wa[g], wb[g], angles[g])


@njit(cache=True, nogil=True)
def _expect_one(psi, axis, wire):
    stride = 1 << wire
    acc = 0.0
    for base in range(0, psi.shape[0], 2 * stride):
        for i0 in range(base, base + stride):
            a0 = psi[i0]
            a1 = psi[i0 + stride]
            if axis == 0:
                acc += 2.0 * (a0.real * a1.real + a0.imag * a1.imag)
            elif axis == 1:
                acc += 2.0 * (a0.real * a1.imag - a0.imag * a1.real)
            else:
                acc += (a0.real * a0.real + a0.imag * a0.imag) - (
                    a1.real * a1.real + a1.imag * a1.imag
                )
    return acc


@njit(cache=True, nogil=True)
def _measure(psi, axes, wires, out):
    for j in range(axes.shape[0]):
        out[j] = _expect_one(psi, axes[j], wires[j])


@njit(cache=True, parallel=True)
def _run_tape(states, kinds, wa, wb, angles, start, stop):
    for b in prange(states.shape[0]):
        _run_range(states[b], kinds, wa, wb, angles[b], start, stop)


@njit(cache=True, parallel=True)
def _expectations(states, axes, wires, out):
    for b in prange(states.shape[0]):
        _measure(states[b], axes, wires, out[b])


@njit(cache=True, parallel=True)
def _run_batch(init, kinds, wa, wb, angles, axes, wires, out):
    n_gates = kinds.shape[0]
    for b in prange(angles.shape[0]):
        psi = init.copy()
        _run_range(psi, kinds, wa, wb, angles[b], 0, n_gates)
        _measure(psi, axes, wires, out[b])


@njit(cache=True, parallel=True)
def _final_states(init, kinds, wa, wb, angles, out):
    n_gates = kinds.shape[0]
    for b in prange(angles.shape[0]):
        psi = init.copy()
        _run_range(psi, kinds, wa, wb, angles[b], 0, n_gates)
        out[b] = psi


@njit(cache=True, parallel=True)
def _shift_jacobian(init, kinds, wa, wb, angles, param_gates, axes, wires, vals, jac):
    n_gates = kinds.shape[0]
    n_par = param_gates.shape[0]
    dim = init.shape[0]
    half_pi = 0.5 * math.pi
    for b in prange(angles.shape[0]):
        ang = angles[b]
        psi = init.copy()
        # state just before each trainable gate; shifted runs replay only the suffix
        ckpt = np.empty((n_par, dim), dtype=np.complex128)
        g = 0
        for p in range(n_par):
            _run_range(psi, kinds, wa, wb, ang, g, param_gates[p])
            g = param_gates[p]
            ckpt[p, :] = psi
        _run_range(psi, kinds, wa, wb, ang, g, n_gates)
        _measure(psi, axes, wires, vals[b])
        m = np.empty(axes.shape[0], dtype=np.float64)
        phi = np.empty(dim, dtype=np.complex128)
        for p in range(n_par):
            gp = param_gates[p]
            for sign in (1.0, -1.0):
                phi[:] = ckpt[p]
                apply_op_single(phi, kinds[gp], wa[gp], wb[gp], ang[gp] + sign * half_pi)
                _run_range(phi, kinds, wa, wb, ang, gp + 1, n_gates)
                _measure(phi, axes, wires, m)
                for j in range(m.shape[0]):
                    jac[b, j, p] += 0.5 * sign * m[j]


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def apply_op(states, kind, wa, wb, angles):
    angles = np.broadcast_to(np.asarray(angles, dtype=np.float64), (states.shape[0],))
    for b in range(states.shape[0]):
        apply_op_single(states[b], kind, wa, wb, angles[b])


def run_tape(states, kinds, wa, wb, angles, start=0, stop=None):
    stop = len(kinds) if stop is None else stop
    _run_tape(states, _i64(kinds), _i64(wa), _i64(wb), _f64(angles), start, stop)
    return states


def expectations(states, axes, wires):
    out = np.empty((states.shape[0], len(axes)), dtype=np.float64)
    _expectations(states, _i64(axes), _i64(wires), out)
    return out


def run_batch(init, kinds, wa, wb, angles, axes, wires):
    out = np.empty((angles.shape[0], len(axes)), dtype=np.float64)
    _run_batch(init, _i64(kinds), _i64(wa), _i64(wb), _f64(angles), _i64(axes), _i64(wires), out)
    return out


def final_states(init, kinds, wa, wb, angles):
    out = np.empty((angles.shape[0], init.shape[0]), dtype=np.complex128)
    _final_states(init, _i64(kinds), _i64(wa), _i64(wb), _f64(angles), out)
    return out


def shift_jacobian(init, kinds, wa, wb, angles, param_gates, axes, wires):
    order = np.argsort(param_gates, kind="stable")
    sorted_gates = _i64(np.asarray(param_gates)[order])
    vals = np.empty((angles.shape[0], len(axes)), dtype=np.float64)
    jac = np.zeros((angles.shape[0], len(axes), len(sorted_gates)), dtype=np.float64)
    _shift_jacobian(
        init, _i64(kinds), _i64(wa), _i64(wb), _f64(angles), sorted_gates,
        _i64(axes), _i64(wires), vals, jac,
    )
    out = np.empty_like(jac)
    out[:, :, order] = jac
    return vals, out
