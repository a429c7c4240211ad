import numpy as np
import pytest

from ioc_forge.config import default_config
from ioc_forge.experiments import make_trial, trial_seed
from ioc_forge.simplified import compute_condensed_predictor


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture(scope="session")
def trial3(cfg):
    """Noiseless default-setup trial at T_ini = 3."""
    return make_trial(cfg, 3, trial_seed(0, 99))


@pytest.fixture(scope="session")
def predictor3(trial3):
    return compute_condensed_predictor(trial3.blocks)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_symmetric(rng, n):
    X = rng.standard_normal((n, n))
    return X + X.T


def random_psd(rng, n, floor=0.0):
    X = rng.standard_normal((n, n))
    return X @ X.T + floor * np.eye(n)
