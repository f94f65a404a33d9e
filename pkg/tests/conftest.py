import numpy as np
import pytest

from spdmeans.harness import random_problem, random_spd


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def spd(rng):
    """Factory for random SPD matrices drawn from the test generator."""

    def make(n, cond=50.0):
        return random_spd(n, cond, rng)

    return make


@pytest.fixture
def problem(rng):
    def make(n=3, m=3):
        return random_problem(rng, n, m)

    return make
