import numpy as np
import pytest

from ergokit import kernelgrid, model, norms

RHO, SIGMA = 0.5, 1.0


@pytest.fixture(scope="session")
def ar1():
    return model.ar1(RHO, SIGMA)


@pytest.fixture(scope="session")
def tanh1():
    return model.tanh1(RHO, SIGMA)


@pytest.fixture(scope="session")
def rotcon2():
    return model.rotcon2(RHO, 0.7, SIGMA)


@pytest.fixture(scope="session")
def weight():
    return norms.quadratic_weight(0.1)


@pytest.fixture(scope="session")
def ar1_kernel(ar1, weight):
    return kernelgrid.discretize(ar1, (-8.0, 8.0, 401), weight=weight)


@pytest.fixture(scope="session")
def ar1_kernel_coarse(ar1):
    return kernelgrid.discretize(ar1, (-8.0, 8.0, 201))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
