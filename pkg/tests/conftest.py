import numpy as np
import pytest

from rachlearn.engine import SimConfig, run


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # Compile (or load from cache) the jitted kernels once, so individual
    # test timings reflect the simulation and not the JIT.
    run(SimConfig(width_m=8.0, length_m=8.0, density=1.0, runs=1), 0)
