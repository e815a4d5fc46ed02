import math
import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mixform import builtin_case, run
from mixform.scenario import ARM_PARAMS
from mixform.sim import Scenario

settings.register_profile(
    "mixform", deadline=None, max_examples=200, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("mixform")


@pytest.fixture(scope="session")
def params():
    return ARM_PARAMS


@pytest.fixture(scope="session")
def alpha(params):
    return params.alpha


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


class RunCache:
    """Lazily simulated built-in cases shared by the whole session."""

    def __init__(self):
        self.logs = {}
        self.elapsed = {}

    def __call__(self, name, **changes):
        key = (name, tuple(sorted(changes.items())))
        if key not in self.logs:
            sc = builtin_case(name)
            if changes:
                sc = Scenario(sc.network, sc.config.replace(**changes), sc.name)
            t0 = time.perf_counter()
            self.logs[key] = run(sc)
            self.elapsed[key] = time.perf_counter() - t0
        return self.logs[key]

    def seconds(self, name, **changes):
        self(name, **changes)
        return self.elapsed[(name, tuple(sorted(changes.items())))]


@pytest.fixture(scope="session")
def runs():
    return RunCache()


def wrap(a):
    return (a + math.pi) % (2 * math.pi) - math.pi
