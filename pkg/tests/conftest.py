import numpy as np
import pytest

from balimpute import BalanceProblem, flight_phase
from balimpute._backend import NUMBA_ENABLED


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # Trigger the one-off kernel compilation so timed tests measure the
    # algorithm, not the compiler.
    problem = BalanceProblem(
        pi0=np.full(4, 0.5),
        a_matrix=np.ones((1, 4)),
    )
    flight_phase(problem, np.random.default_rng(0), backend="numpy")
    if NUMBA_ENABLED:
        flight_phase(problem, np.random.default_rng(0), backend="numba")
