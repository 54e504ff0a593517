import numpy as np
import pytest

from relayrd.probcore import doubly_symmetric_binary, validate_source
from relayrd.rdsolve import DistortionMeasure, SolverConfig

HAM = DistortionMeasure.hamming(2)


def random_source(seed, sizes=(2, 2, 2), alpha=1.0):
    """Dirichlet-random joint pmf over (X, Y, Z); every entry positive."""
    rng = np.random.Generator(np.random.Philox(1000 + seed))
    p = rng.dirichlet(np.full(int(np.prod(sizes)), alpha))
    p = 0.9 * p + 0.1 / p.size
    return validate_source(p, ("X", "Y", "Z"), sizes)


@pytest.fixture
def dsbs():
    return doubly_symmetric_binary(0.25)


@pytest.fixture
def ham():
    return HAM


@pytest.fixture
def quick():
    return SolverConfig(restarts=4, seed=0)
