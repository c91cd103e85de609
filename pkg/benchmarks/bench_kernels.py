"""Time the numba and numpy kernel backends, and the dense and factored engines.

    python benchmarks/bench_kernels.py [--batch 64] [--layers 2] [--repeat 5]

Both backends are imported directly, so the QGNN_DISABLE_NUMBA flag does not
matter here. The first numba call (compilation) is excluded from the timings.
"""

import argparse
import time

import numpy as np

from qgnn import model
from qgnn.dataset import distance_tensor
from qgnn.kernels import numba_backend, numpy_backend
from qgnn.training import init_params


def best_of(fn, repeat):
    fn()  # warm-up / JIT
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=64)
    ap.add_argument("--layers", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    coords = rng.uniform(0, 1, (args.batch, 3, 3))
    dists = distance_tensor(coords)
    coords = coords.reshape(args.batch, 9)
    params = init_params(args.layers, 0)
    tape = model.build_tape(args.layers)
    angles = tape.angles(coords, dists, params.thetas.ravel())
    psi0 = np.zeros(512, dtype=np.complex128)
    psi0[0] = 1.0

    print(f"batch {args.batch}, {args.layers} layers, {tape.n_gates} gates, best of {args.repeat}")
    print(f"{'kernel (9 qubits, dense)':<34}{'numpy [s]':>12}{'numba [s]':>12}{'speed-up':>10}")
    cases = {
        "forward (run_batch)": lambda be: be.run_batch(
            psi0, tape.kinds, tape.wa, tape.wb, angles, tape.meas_axes, tape.meas_wires
        ),
        "jacobian (shift_jacobian)": lambda be: be.shift_jacobian(
            psi0, tape.kinds, tape.wa, tape.wb, angles, tape.theta_gates, tape.meas_axes, tape.meas_wires
        ),
    }
    for name, call in cases.items():
        t_np = best_of(lambda: call(numpy_backend), args.repeat)
        t_nb = best_of(lambda: call(numba_backend), args.repeat)
        print(f"{name:<34}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>9.1f}x")

    print(f"\n{'engine (active backend)':<34}{'dense [s]':>12}{'factored [s]':>14}{'speed-up':>10}")
    for name, call in {
        "forward_batch": lambda e: model.forward_batch(coords, dists, params, engine=e),
        "raw_jacobian_batch": lambda e: model.raw_jacobian_batch(coords, dists, params, engine=e),
    }.items():
        t_d = best_of(lambda: call("dense"), args.repeat)
        t_f = best_of(lambda: call("factored"), args.repeat)
        print(f"{name:<34}{t_d:>12.4f}{t_f:>14.4f}{t_d / t_f:>9.1f}x")


if __name__ == "__main__":
    main()
