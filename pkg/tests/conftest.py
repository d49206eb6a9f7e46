import numpy as np
import pytest

from cptq.choquet import DiscreteLaw


def random_discrete_law(rng, max_atoms=50, scale=5.0, signed=False):
    n = int(rng.integers(1, max_atoms + 1))
    values = rng.normal(0.0, scale, n) if signed else rng.exponential(scale, n)
    probs = rng.dirichlet(np.ones(n))
    return DiscreteLaw(values, probs)


@pytest.fixture
def rng():
    return np.random.default_rng(20240810)
