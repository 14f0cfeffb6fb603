import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cbsurv import SurvivalData


@pytest.fixture
def toy_dataset():
    """Times {1, 2, 3}, statuses {1, 0, 1}: B = 6, c = 2."""
    return SurvivalData([1.0, 2.0, 3.0], [1, 0, 1], [[0.5], [1.0], [1.5]], ["z"])


@pytest.fixture
def exponential_dataset():
    rng = np.random.default_rng(42)
    n = 400
    times = rng.exponential(2.0, n)
    event = (rng.random(n) < 0.8).astype(int)
    covariates = rng.normal(size=(n, 2))
    return SurvivalData(times, event, covariates, ["a", "b"])


def random_survival_data(rng, n_max=20, allow_ties=True):
    n = int(rng.integers(4, n_max + 1))
    times = rng.exponential(2.0, n)
    if allow_ties:
        times = np.round(times, 1) + 0.05
    event = (rng.random(n) < 0.7).astype(int)
    if event.sum() == 0:
        event[int(rng.integers(0, n))] = 1
    covariates = rng.normal(size=(n, 2))
    return SurvivalData(times, event, covariates)
