import numpy as np
import pytest

from driftbench.statespace import build_matrices, load_params

# Stock parameter values with the return-noise correlation replaced by a
# magnitude-valid stand-in (0.6309): the shipped set has |rho| > 1 and is
# rejected at load time, which the pathology tests cover on their own.
VALID_PARAMS = {
    "k": 2.0714,
    "theta": 2.0451,
    "sigma": 0.3003,
    "mu": 0.1907,
    "a": 0.9197,
    "rho": 0.6309,
    "Q1": 0.0310,
    "Q2": -0.8857,
}

PATHOLOGICAL_PARAMS = dict(VALID_PARAMS, rho=1.6309)


@pytest.fixture(scope="session")
def valid_params():
    return load_params(VALID_PARAMS)


@pytest.fixture(scope="session")
def model(valid_params):
    return build_matrices(valid_params)


def random_spd(rng, n=2, scale=1.0):
    a = rng.standard_normal((n, n))
    return scale * (a @ a.T + 0.1 * n * np.eye(n))
