"""Synthetic water-molecule data: oracle potential, augmentation, scaling, splits, I/O.

Atom order is (O, H1, H2), axis order (x, y, z). Lengths and energies are in
reduced units of the harmonic oracle.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .model import PAIRS, ScaledSample

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DATA_FORMAT = "qgnn-h2o-jsonl"


class DatasetFormatError(ValueError):
    """A dataset file that cannot be parsed."""


@dataclass(frozen=True)
class OracleConfig:
    r0: float = 0.9572
    theta0_deg: float = 104.52
    k_bond: float = 1.0
    k_angle: float = 0.5
    noise: float = 0.05 * 0.9572
    translation: float = 0.1
    # rigid rotation applied to each generated molecule: axis uniform on the
    # sphere, angle uniform in [-max, max]; 180 gives unrestricted orientations
    rotation_max_deg: float = 180.0

    @property
    def theta0(self):
        return math.radians(self.theta0_deg)


@dataclass
class RawSample:
    coords: np.ndarray  # (3, 3) atom x axis
    forces: np.ndarray  # (3, 3)
    energy: float

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64).reshape(3, 3)
        self.forces = np.asarray(self.forces, dtype=np.float64).reshape(3, 3)
        self.energy = float(self.energy)


def equilibrium_geometry(oracle=OracleConfig()):
    """O at the origin, both hydrogens in the xy plane, symmetric about +y."""
    h = 0.5 * oracle.theta0
    return np.array(
        [
            [0.0, 0.0, 0.0],
            [oracle.r0 * math.sin(h), oracle.r0 * math.cos(h), 0.0],
            [-oracle.r0 * math.sin(h), oracle.r0 * math.cos(h), 0.0],
        ]
    )


def harmonic_energy_forces(coords, oracle=OracleConfig()):
    """Energy and forces of the bond + angle harmonic potential.

    E = sum_bonds k_b/2 (r - r0)^2 + k_a/2 (theta - theta0)^2, F = -grad E.
    ``coords`` may be ``(3, 3)`` or ``(n, 3, 3)``.
    """
    x = np.asarray(coords, dtype=np.float64)
    single = x.ndim == 2
    x = x.reshape(-1, 3, 3)
    d1 = x[:, 1] - x[:, 0]
    d2 = x[:, 2] - x[:, 0]
    r1 = np.linalg.norm(d1, axis=1)
    r2 = np.linalg.norm(d2, axis=1)
    u1 = d1 / r1[:, None]
    u2 = d2 / r2[:, None]
    cos_t = np.clip(np.sum(u1 * u2, axis=1), -1.0, 1.0)
    theta = np.arccos(cos_t)
    sin_t = np.sqrt(1.0 - cos_t**2)

    energy = 0.5 * oracle.k_bond * ((r1 - oracle.r0) ** 2 + (r2 - oracle.r0) ** 2)
    energy += 0.5 * oracle.k_angle * (theta - oracle.theta0) ** 2

    grad = np.zeros_like(x)
    gb1 = (oracle.k_bond * (r1 - oracle.r0))[:, None] * u1
    gb2 = (oracle.k_bond * (r2 - oracle.r0))[:, None] * u2
    # d theta / d H1 = -(u2 - cos u1) / (r1 sin)
    dtheta = (oracle.k_angle * (theta - oracle.theta0) / sin_t)[:, None]
    ga1 = -dtheta * (u2 - cos_t[:, None] * u1) / r1[:, None]
    ga2 = -dtheta * (u1 - cos_t[:, None] * u2) / r2[:, None]
    grad[:, 1] = gb1 + ga1
    grad[:, 2] = gb2 + ga2
    grad[:, 0] = -(grad[:, 1] + grad[:, 2])
    forces = -grad
    if single:
        return float(energy[0]), forces[0]
    return energy, forces


def generate_synthetic(n, seed, oracle=OracleConfig()):
    """``n`` perturbed, randomly oriented and translated molecules with oracle labels."""
    if int(n) < 1:
        raise ValueError(f"sample count must be positive, got {n}")
    rng = np.random.default_rng(seed)
    eq = equilibrium_geometry(oracle)
    eq = eq - eq.mean(axis=0)
    coords = eq[None] + rng.normal(0.0, oracle.noise, size=(n, 3, 3))
    max_angle = math.radians(oracle.rotation_max_deg)
    for i in range(n):
        k, theta = random_axis_angle(rng, max_angle)
        coords[i] = rodrigues_rotate(coords[i], k, theta)
    coords += rng.uniform(-oracle.translation, oracle.translation, size=(n, 1, 3))
    energy, forces = harmonic_energy_forces(coords, oracle)
    return [RawSample(coords[i], forces[i], energy[i]) for i in range(n)]


def rodrigues_rotate(v, axis, theta):
    """Rotate ``v`` (a 3-vector or ``(..., 3)`` array) by ``theta`` about unit ``axis``."""
    k = np.asarray(axis, dtype=np.float64)
    if k.shape != (3,) or abs(np.linalg.norm(k) - 1.0) > 1e-9:
        raise ValueError(f"rotation axis must be a unit 3-vector, got {axis!r}")
    v = np.asarray(v, dtype=np.float64)
    c, s = math.cos(theta), math.sin(theta)
    return v * c + np.cross(k, v) * s + np.outer(v @ k, k).reshape(v.shape) * (1.0 - c)


def random_axis_angle(rng, max_angle=math.pi):
    """Axis uniform on the sphere, angle uniform in [-max_angle, max_angle).

    With ``max_angle = pi`` this is the same rotation law as an angle uniform
    in [0, 2 pi).
    """
    k = rng.normal(size=3)
    return k / np.linalg.norm(k), rng.uniform(-max_angle, max_angle)


def augment(samples, factor=10, seed=0, max_angle_deg=180.0):
    """Each sample followed by ``factor - 1`` copies rotated about its centroid."""
    if factor < 1:
        raise ValueError("augmentation factor must be >= 1")
    rng = np.random.default_rng(seed)
    max_angle = math.radians(max_angle_deg)
    out = []
    for s in samples:
        out.append(s)
        centroid = s.coords.mean(axis=0)
        for _ in range(factor - 1):
            k, theta = random_axis_angle(rng, max_angle)
            coords = centroid + rodrigues_rotate(s.coords - centroid, k, theta)
            forces = rodrigues_rotate(s.forces, k, theta)
            out.append(RawSample(coords, forces, s.energy))
    return out


# --- scaling ------------------------------------------------------------


def distance_tensor(scaled_coords):
    """Per-axis |a_c - b_c| for the pairs (O,H1), (O,H2), (H1,H2): ``(n, 3, 3)``."""
    x = np.asarray(scaled_coords, dtype=np.float64).reshape(-1, 3, 3)
    return np.stack([np.abs(x[:, i, :] - x[:, j, :]) for i, j in PAIRS], axis=2)


@dataclass
class Scalers:
    coord_min: np.ndarray
    coord_max: np.ndarray
    force_max: float
    energy_max: float
    distance_max: float

    def __post_init__(self):
        self.coord_min = np.asarray(self.coord_min, dtype=np.float64).reshape(3)
        self.coord_max = np.asarray(self.coord_max, dtype=np.float64).reshape(3)

    @property
    def coord_range(self):
        span = self.coord_max - self.coord_min
        return np.where(span > 0, span, 1.0)

    @classmethod
    def fit(cls, samples):
        coords = np.stack([s.coords for s in samples])
        forces = np.stack([s.forces for s in samples])
        energy = np.array([s.energy for s in samples])
        lo = coords.min(axis=(0, 1))
        hi = coords.max(axis=(0, 1))
        fmax = float(np.abs(forces).max()) or 1.0
        emax = float(np.abs(energy).max()) or 1.0
        partial = cls(lo, hi, fmax, emax, 1.0)
        dmax = float(distance_tensor(partial.scale_coords(coords)).max()) or 1.0
        return cls(lo, hi, fmax, emax, dmax)

    def scale_coords(self, coords):
        return (np.asarray(coords) - self.coord_min) / self.coord_range

    def unscale_coords(self, scaled):
        return np.asarray(scaled) * self.coord_range + self.coord_min

    def scale_forces(self, forces):
        return np.asarray(forces) / self.force_max

    def unscale_forces(self, scaled):
        return np.asarray(scaled) * self.force_max

    def scale_energy(self, energy):
        return np.asarray(energy) / self.energy_max

    def unscale_energy(self, scaled):
        return np.asarray(scaled) * self.energy_max

    def to_dict(self):
        return {
            "coord_min": self.coord_min.tolist(),
            "coord_max": self.coord_max.tolist(),
            "force_max": self.force_max,
            "energy_max": self.energy_max,
            "distance_max": self.distance_max,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            d["coord_min"], d["coord_max"], d["force_max"], d["energy_max"], d["distance_max"]
        )


@dataclass
class ScaledDataset:
    coords: np.ndarray  # (n, 9)
    distances: np.ndarray  # (n, 3, 3)
    forces: np.ndarray  # (n, 9)
    energy: np.ndarray  # (n,)

    def __len__(self):
        return self.coords.shape[0]

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return ScaledDataset(
            self.coords[idx], self.distances[idx], self.forces[idx], self.energy[idx]
        )

    def sample(self, i):
        return ScaledSample(self.coords[i], self.distances[i], self.forces[i], self.energy[i])

    def __iter__(self):
        return (self.sample(i) for i in range(len(self)))

    @property
    def labels(self):
        """``(n, 10)``: nine forces then the energy."""
        return np.concatenate([self.forces, self.energy[:, None]], axis=1)


def _clamp(name, values, lo, hi):
    bad = int(np.count_nonzero((values < lo) | (values > hi)))
    if bad:
        log.warning("clamped %d %s value(s) outside [%g, %g]", bad, name, lo, hi)
    return np.clip(values, lo, hi), bad


def preprocess(samples, scalers=None):
    """Scale raw samples; fits ``scalers`` on ``samples`` when none are given.

    Returns ``(ScaledDataset, scalers)``.
    """
    if scalers is None:
        scalers = Scalers.fit(samples)
    coords = np.stack([s.coords for s in samples])
    forces = np.stack([s.forces for s in samples])
    energy = np.array([s.energy for s in samples])

    sc = scalers.scale_coords(coords)
    dist = distance_tensor(sc) / scalers.distance_max
    sc, _ = _clamp("coordinate", sc, 0.0, 1.0)
    dist, _ = _clamp("distance", dist, 0.0, 1.0)
    f, _ = _clamp("force", scalers.scale_forces(forces), -1.0, 1.0)
    e, _ = _clamp("energy", scalers.scale_energy(energy), -1.0, 1.0)
    return ScaledDataset(sc.reshape(-1, 9), dist, f.reshape(-1, 9), e), scalers


# --- splits ---------------------------------------------------------------


@dataclass
class DatasetSplit:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    split_seed: int = 0

    def sizes(self):
        return len(self.train), len(self.val), len(self.test)


def split(n_samples, seed, fractions=(0.8, 0.1)):
    """Shuffled 80/10/10 index split; ``n_samples`` may be a count or a sequence."""
    n = n_samples if isinstance(n_samples, (int, np.integer)) else len(n_samples)
    if n < 10:
        raise ValueError(f"need at least 10 samples to split, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    return DatasetSplit(
        np.sort(perm[:n_train]),
        np.sort(perm[n_train : n_train + n_val]),
        np.sort(perm[n_train + n_val :]),
        int(seed),
    )


# --- file I/O -------------------------------------------------------------


@dataclass
class DatasetHeader:
    seed: int
    augment_seed: int
    factor: int
    n_raw: int
    n_samples: int
    augment_max_angle_deg: float = 180.0
    oracle: dict = field(default_factory=lambda: asdict(OracleConfig()))
    schema_version: int = SCHEMA_VERSION
    units: dict = field(
        default_factory=lambda: {"length": "reduced", "force": "reduced", "energy": "reduced"}
    )

    def to_record(self):
        return {"record": "header", "format": DATA_FORMAT, **asdict(self)}


def write_dataset(path, samples, header):
    path = Path(path)
    lines = [json.dumps(header.to_record(), sort_keys=True)]
    for s in samples:
        lines.append(
            json.dumps(
                {
                    "coords": s.coords.ravel().tolist(),
                    "forces": s.forces.ravel().tolist(),
                    "energy": s.energy,
                }
            )
        )
    path.write_text("\n".join(lines) + "\n")
    return path


def read_dataset(path):
    """Return ``(samples, header)``; malformed records raise :class:`DatasetFormatError`."""
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DatasetFormatError(f"{path}: empty dataset file")
    try:
        head = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"{path}: header is not valid JSON ({exc})") from None
    if head.get("record") != "header" or head.get("format") != DATA_FORMAT:
        raise DatasetFormatError(f"{path}: missing {DATA_FORMAT} header record")
    if head.get("schema_version") != SCHEMA_VERSION:
        raise DatasetFormatError(
            f"{path}: unsupported schema version {head.get('schema_version')!r}"
        )
    head = {k: v for k, v in head.items() if k not in ("record", "format")}
    try:
        header = DatasetHeader(**head)
    except TypeError as exc:
        raise DatasetFormatError(f"{path}: bad header record ({exc})") from None
    samples = []
    for i, line in enumerate(lines[1:]):
        try:
            rec = json.loads(line)
            coords = np.array(rec["coords"], dtype=np.float64)
            forces = np.array(rec["forces"], dtype=np.float64)
            energy = float(rec["energy"])
            if coords.shape != (9,) or forces.shape != (9,):
                raise ValueError("coords and forces need 9 values each")
            if not (np.all(np.isfinite(coords)) and np.all(np.isfinite(forces))):
                raise ValueError("non-finite value")
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DatasetFormatError(f"{path}: record {i} is malformed ({exc})") from None
        samples.append(RawSample(coords, forces, energy))
    if len(samples) != header.n_samples:
        raise DatasetFormatError(
            f"{path}: header announces {header.n_samples} records, found {len(samples)}"
        )
    return samples, header
