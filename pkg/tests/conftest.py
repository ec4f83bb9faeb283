import numpy as np
import pytest

from faceanon.backends import SyntheticBackend, SyntheticConfig


@pytest.fixture(scope="session")
def backend():
    return SyntheticBackend(SyntheticConfig(seed=7))


@pytest.fixture(scope="session")
def backend_eps0():
    return SyntheticBackend(SyntheticConfig(seed=7, eps_couple=0.0))


@pytest.fixture(scope="session")
def sample_code(backend):
    return backend.sample_latents(1, seed=100)[0]


@pytest.fixture(scope="session")
def sample_image(backend, sample_code):
    return backend.generate(sample_code)


def rng(seed=0):
    return np.random.default_rng(seed)
