import warnings

import numpy as np
import pytest

from cbolab.dynamics import Ensemble
from cbolab.objectives import make_builtin


@pytest.fixture(autouse=True)
def _silence_supercritical_warnings():
    # several tests intentionally explore sigma >= sigma_tilde
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="sigma = .*")
        yield


@pytest.fixture(scope="session")
def builtin_objectives():
    return {
        1: [make_builtin(name, 1) for name in ("saturating-norm", "gauss-well", "soft-rastrigin")],
        2: [make_builtin(name, 2) for name in ("saturating-norm", "gauss-well", "soft-rastrigin")],
    }


def random_ensemble(gen, max_j=64, max_d=8, scale=3.0, min_j=2):
    J = int(gen.integers(min_j, max_j + 1))
    d = int(gen.integers(1, max_d + 1))
    return Ensemble(gen.normal(0.0, scale, (J, d)))


def random_ensemble_pair(gen, max_j=32, max_d=4, scale=2.0):
    J = int(gen.integers(2, max_j + 1))
    d = int(gen.integers(1, max_d + 1))
    return (
        Ensemble(gen.normal(0.0, scale, (J, d))),
        Ensemble(gen.normal(gen.uniform(-1, 1), scale, (J, d))),
    )
