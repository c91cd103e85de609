"""Expressibility as KL(sampled fidelity histogram || Haar fidelity law).

Fidelities are taken between final 9-qubit states of the circuit for two
independent draws of the trainable angles (N(0, 1), as at initialisation)
with the data input held at the equilibrium geometry.
"""

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels, model
from .dataset import OracleConfig, distance_tensor, equilibrium_geometry
from .model import THETAS_PER_LAYER, ScaledSample
from .sim import fidelities

HILBERT_DIM = 1 << model.N_QUBITS


@dataclass
class FidelityHistogram:
    counts: np.ndarray
    edges: np.ndarray

    @property
    def bin_count(self):
        return len(self.counts)

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def probabilities(self):
        return self.counts / self.total


def fidelity_histogram(values, bins=75):
    values = np.asarray(values, dtype=np.float64)
    if np.any(values < -1e-12) or np.any(values > 1 + 1e-12):
        raise ValueError("fidelities must lie in [0, 1]")
    edges = np.linspace(0.0, 1.0, bins + 1)
    counts, _ = np.histogram(np.clip(values, 0.0, 1.0), bins=edges)
    return FidelityHistogram(counts, edges)


def log_haar_probability(lo, hi, dim=HILBERT_DIM):
    """log of the Haar mass on [lo, hi]: (1 - lo)^(d-1) - (1 - hi)^(d-1)."""
    if not 0.0 <= lo < hi <= 1.0:
        raise ValueError(f"invalid bin [{lo}, {hi}]")
    if dim == 1:
        return 0.0 if hi == 1.0 else -math.inf
    top = (dim - 1) * math.log1p(-lo)
    if hi >= 1.0:
        return top
    ratio = (dim - 1) * (math.log1p(-hi) - math.log1p(-lo))
    return top + math.log1p(-math.exp(ratio))


def haar_probability(lo, hi, dim=HILBERT_DIM):
    return math.exp(log_haar_probability(lo, hi, dim))


def haar_bin_masses(bins=75, dim=HILBERT_DIM):
    edges = np.linspace(0.0, 1.0, bins + 1)
    return np.array([haar_probability(edges[i], edges[i + 1], dim) for i in range(bins)])


def kl_to_haar(hist, dim=HILBERT_DIM):
    """sum_bins p log(p / q_Haar); empty bins contribute nothing."""
    p = hist.probabilities
    kl = 0.0
    for i in np.flatnonzero(p):
        kl += p[i] * (math.log(p[i]) - log_haar_probability(hist.edges[i], hist.edges[i + 1], dim))
    return float(kl)


def reference_input(oracle=OracleConfig()):
    """Equilibrium water in a fixed box: centred coordinates / (2 r0) + 1/2."""
    eq = equilibrium_geometry(oracle)
    eq = eq - eq.mean(axis=0)
    coords = eq / (2.0 * oracle.r0) + 0.5
    dist = distance_tensor(coords)[0]
    return ScaledSample(coords.ravel(), dist / dist.max())


def _factored_fidelities(coords, dists, thetas, phis, n_layers):
    # the final state is a product over the three axis groups, so the overlap is too
    tape = model.build_tape(n_layers)
    ang_a = tape.angles(coords, dists, thetas)
    ang_b = tape.angles(coords, dists, phis)
    init = np.zeros(8, dtype=np.complex128)
    init[0] = 1.0
    out = np.ones(ang_a.shape[0])
    for grp in model.axis_groups(n_layers):
        a = kernels.final_states(init, grp.kinds, grp.wa, grp.wb, np.ascontiguousarray(ang_a[:, grp.gates]))
        b = kernels.final_states(init, grp.kinds, grp.wa, grp.wb, np.ascontiguousarray(ang_b[:, grp.gates]))
        out *= fidelities(a, b)
    return out


def sample_fidelities(n_layers, sample_count, seed, sample=None, chunk=1000, engine=None):
    """``sample_count`` fidelities |<psi(theta)|psi(phi)>|^2, theta, phi ~ N(0, 1)."""
    if sample_count < 1:
        raise ValueError("sample count must be >= 1")
    engine = engine or model.DEFAULT_ENGINE
    if engine not in model.ENGINES:
        raise ValueError(f"unknown engine {engine!r}")
    sample = reference_input() if sample is None else sample
    rng = np.random.default_rng(seed)
    n_theta = n_layers * THETAS_PER_LAYER
    thetas = rng.normal(size=(sample_count, n_theta))
    phis = rng.normal(size=(sample_count, n_theta))
    out = np.empty(sample_count)
    for start in range(0, sample_count, chunk):
        sl = slice(start, start + chunk)
        m = thetas[sl].shape[0]
        coords = np.broadcast_to(sample.coords, (m, 9))
        dists = np.broadcast_to(sample.distances, (m, 3, 3))
        if engine == "factored":
            out[sl] = _factored_fidelities(coords, dists, thetas[sl], phis[sl], n_layers)
        else:
            a = model.final_states_batch(coords, dists, thetas[sl], n_layers)
            b = model.final_states_batch(coords, dists, phis[sl], n_layers)
            out[sl] = fidelities(a, b)
    return np.clip(out, 0.0, 1.0)


def expressibility(n_layers, sample_count=5000, bins=75, seed=0, sample=None, engine=None):
    fids = sample_fidelities(n_layers, sample_count, seed, sample, engine=engine)
    return kl_to_haar(fidelity_histogram(fids, bins))


def layer_sweep(layers, sample_count=5000, bins=75, seed=0, engine=None):
    layers = list(layers)
    if not layers:
        raise ValueError("layer range is empty")
    return [
        {
            "n_layers": n,
            "kl_divergence": expressibility(n, sample_count, bins, seed, engine=engine),
            "samples": sample_count,
            "bins": bins,
            "seed": seed,
        }
        for n in layers
    ]


SWEEP_COLUMNS = ("n_layers", "kl_divergence", "samples", "bins", "seed")


def write_sweep_csv(path, rows):
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({**row, "kl_divergence": repr(float(row["kl_divergence"]))})
    return Path(path)
