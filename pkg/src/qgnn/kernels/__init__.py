"""Backend selection for the statevector kernels.

Numba is used when importable unless ``QGNN_DISABLE_NUMBA`` is set to a
truthy value, in which case the vectorised numpy path runs instead. Both
backends expose the same functions: ``apply_op``, ``run_tape``,
``expectations``, ``run_batch``, ``final_states``, ``shift_jacobian``.
"""

import os

from . import codes, numpy_backend


def _numba_requested():
    flag = os.environ.get("QGNN_DISABLE_NUMBA", "").strip().lower()
    return flag in ("", "0", "false", "no")


if _numba_requested():
    try:
        from . import numba_backend as backend
    except ImportError:  # numba missing
        backend = numpy_backend
else:
    backend = numpy_backend

BACKEND_NAME = "numba" if backend is not numpy_backend else "numpy"

apply_op = backend.apply_op
run_tape = backend.run_tape
expectations = backend.expectations
run_batch = backend.run_batch
final_states = backend.final_states
shift_jacobian = backend.shift_jacobian


def set_threads(n):
    """Cap the worker count of the parallel kernels (no-op for numpy)."""
    if BACKEND_NAME == "numba" and n:
        import numba

        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


__all__ = [
    "BACKEND_NAME",
    "apply_op",
    "backend",
    "codes",
    "expectations",
    "final_states",
    "run_batch",
    "run_tape",
    "set_threads",
    "shift_jacobian",
]
