import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lure_smo.scenarios import builtin
from lure_smo.sim import integrate_coupled

# first calls pay numba compilation; never let that trip a deadline
settings.register_profile(
    "repo", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def ex1():
    return builtin("example1").build()


@pytest.fixture(scope="session")
def ex2_xi1():
    return builtin("example2-xi1").build()


@pytest.fixture(scope="session")
def ex2_xi2():
    return builtin("example2-xi2").build()


@pytest.fixture(scope="session")
def ex1_traj(ex1):
    return integrate_coupled(ex1.system, ex1.observer, ex1.x0, ex1.xhat0, ex1.scheme)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
