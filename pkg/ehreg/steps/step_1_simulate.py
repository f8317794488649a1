"""
step_1_simulate.py - Write a simulated contamination dataset: data.csv, holdout.csv
(clean test points) and a truth.json sidecar.
"""

import os
import logging

import numpy as np
import pandas as pd

from ehreg.errors import ValidationError
from ehreg.model import OutlierScenario
from ehreg.simulation import RandomInterceptDesign, RegressionDesign, simulate_random_intercept, simulate_regression
from ehreg.utils.io import save_json, write_csv

if not logging.getLogger().hasHandlers():
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')

DATA_FILE = "data.csv"
HOLDOUT_FILE = "holdout.csv"
TRUTH_FILE = "truth.json"


def dataset_frame(dataset, outlier=None):
    """y, covariates (without the intercept column), optional group and outlier indicator."""
    start = 1 if dataset.has_intercept else 0
    frame = pd.DataFrame(dataset.X[:, start:], columns=dataset.covariate_names[start:])
    frame.insert(0, "y", dataset.y)
    if dataset.groups is not None:
        frame["group"] = dataset.groups
    if outlier is not None:
        frame["outlier"] = np.asarray(outlier, dtype=int)
    return frame


def run_simulation(scenario: OutlierScenario, out_dir, seed, design="regression", n=None, p=None):
    """Simulate one dataset for `scenario` and write it under out_dir. Returns the written paths."""
    rng = np.random.default_rng(seed)
    if design == "regression":
        spec = RegressionDesign() if n is None and p is None else RegressionDesign.with_size(n or 300, p or 20)
        simulated = simulate_regression(spec, scenario, rng)
    elif design == "ri":
        simulated = simulate_random_intercept(RandomInterceptDesign(), scenario, rng)
    else:
        raise ValidationError(f"Unknown design '{design}'")

    paths = {"data": os.path.join(out_dir, DATA_FILE), "truth": os.path.join(out_dir, TRUTH_FILE)}
    write_csv(dataset_frame(simulated.dataset, simulated.outlier), paths["data"], "simulated data")
    if simulated.holdout is not None:
        paths["holdout"] = os.path.join(out_dir, HOLDOUT_FILE)
        write_csv(dataset_frame(simulated.holdout), paths["holdout"], "holdout data")
    truth = dict(simulated.truth, seed=seed, design=design, n_outliers=int(simulated.outlier.sum()))
    save_json(truth, paths["truth"], "truth sidecar")
    logging.info(f"Simulated scenario {scenario.label}: {simulated.dataset.n} rows, "
                 f"{truth['n_outliers']} contaminated")
    return paths
