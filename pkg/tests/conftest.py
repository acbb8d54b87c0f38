import numpy as np
import pytest

from mfl import ParticleEnsemble, TwoLayerNNObjective, quadratic_potential, torus
from mfl.presets import kmmd_1d_objective, kmmd_2d_objective

TWO_PI = 2.0 * np.pi


@pytest.fixture(scope="session")
def kmmd2d():
    return kmmd_2d_objective()


@pytest.fixture(scope="session")
def kmmd1d():
    return kmmd_1d_objective(64)


@pytest.fixture(scope="session")
def quad2d():
    return quadratic_potential(0.7, 2)


def _nn_data(loss):
    rng = np.random.default_rng(314)
    zs = rng.standard_normal((16, 1))
    ys = (np.sign(zs[:, 0]) if loss == "logistic"
          else np.tanh(zs[:, 0]) + 0.1 * rng.standard_normal(16))
    return zs, ys


@pytest.fixture(scope="session")
def nn_square():
    zs, ys = _nn_data("square")
    return TwoLayerNNObjective(zs, ys, loss="square", weight_decay=0.3,
                               feature_bound=1.5)


@pytest.fixture(scope="session")
def nn_logistic():
    zs, ys = _nn_data("logistic")
    return TwoLayerNNObjective(zs, ys, loss="logistic", weight_decay=0.5,
                               feature_bound=1.0)


def random_torus_ensemble(rng, m, d=2):
    return ParticleEnsemble(torus(d), rng.random((m, d)) * TWO_PI)
