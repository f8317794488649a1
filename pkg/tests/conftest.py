import os

import numpy as np
import pytest

from ehreg import config as ehreg_config
from ehreg.model import Dataset


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running statistical checks")
    config.addinivalue_line("markers", "desk: desk-scale table reproductions, run only with EHREG_DESK=1")


def pytest_collection_modifyitems(config, items):
    if os.getenv("EHREG_DESK") == "1":
        return
    skip_desk = pytest.mark.skip(reason="desk-scale reproduction; set EHREG_DESK=1 to run")
    for item in items:
        if "desk" in item.keywords:
            item.add_marker(skip_desk)


@pytest.fixture(autouse=True)
def quiet_progress(monkeypatch):
    monkeypatch.setattr(ehreg_config, "SHOW_PROGRESS", False)


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


def make_regression(seed=7, n=60, beta=(1.0, 2.0, -1.0), sigma=0.5, intercept=True):
    rng = np.random.default_rng(seed)
    beta = np.asarray(beta, dtype=float)
    k = beta.shape[0] - 1 if intercept else beta.shape[0]
    covariates = rng.standard_normal((n, k))
    X = np.column_stack([np.ones(n), covariates]) if intercept else covariates
    y = X @ beta + sigma * rng.standard_normal(n)
    return Dataset(y=y, X=X, has_intercept=intercept)


@pytest.fixture
def small_regression():
    return make_regression()
