import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qgnn.dataset import distance_tensor
from qgnn.model import ScaledSample
from qgnn.training import init_params

warnings.filterwarnings("ignore", message=".*TBB.*")

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_sample(rng):
    coords = rng.uniform(0.0, 1.0, size=(3, 3))
    return ScaledSample(coords.ravel(), distance_tensor(coords)[0], rng.uniform(-1, 1, 9), rng.uniform(-1, 1))


def random_params(rng, n_layers=2):
    p = init_params(n_layers, int(rng.integers(1 << 31)))
    return p


@pytest.fixture
def sample(rng):
    return random_sample(rng)


@pytest.fixture
def params(rng):
    return random_params(rng)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[1])):
        terminalreporter.write_line(line)
