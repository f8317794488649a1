import os

import numpy as np
import pandas as pd
import pytest

from ehreg.errors import ValidationError
from ehreg.model import OutlierScenario
from ehreg.simulation import (
    RandomInterceptDesign,
    RegressionDesign,
    correlated_covariates,
    default_coefficients,
    simulate_random_intercept,
    simulate_regression,
)
from ehreg.steps.step_1_simulate import DATA_FILE, HOLDOUT_FILE, TRUTH_FILE, run_simulation
from ehreg.utils.io import load_json


class TestDesigns:
    def test_default_coefficients(self):
        beta = default_coefficients(20)
        assert beta.shape == (21,)
        assert beta[0] == 0.5 and beta[1] == beta[4] == 0.3 and beta[7] == beta[10] == 2.0
        assert np.count_nonzero(beta) == 5
        np.testing.assert_array_equal(default_coefficients(3), [0.5, 0.3, 0.0, 0.0])

    def test_with_size(self):
        design = RegressionDesign.with_size(50, 5)
        assert (design.n, design.p, design.n_holdout) == (50, 5, 20)
        assert len(design.coefficients) == 6

    def test_covariate_correlation(self, rng):
        X = correlated_covariates(rng, 20_000, 3, 0.5)
        np.testing.assert_allclose(np.corrcoef(X.T), [[1.0, 0.5, 0.25], [0.5, 1.0, 0.5], [0.25, 0.5, 1.0]],
                                   atol=0.03)


class TestRegressionStudy:
    def test_shapes_and_truth(self, rng):
        simulated = simulate_regression(RegressionDesign(), OutlierScenario(0.1, 20.0), rng)
        assert simulated.dataset.X.shape == (300, 21)
        assert simulated.holdout.X.shape == (20, 21)
        np.testing.assert_array_equal(simulated.dataset.X[:, 0], np.ones(300))
        assert simulated.truth["scenario"] == "(10,20)"
        assert 15 <= simulated.outlier.sum() <= 45

    def test_outliers_are_shifted(self, rng):
        design = RegressionDesign()
        simulated = simulate_regression(design, OutlierScenario(0.1, 20.0), rng)
        residual = simulated.dataset.y - simulated.dataset.X @ np.asarray(design.coefficients)
        assert residual[simulated.outlier].mean() == pytest.approx(10.0, abs=1.0)
        assert residual[~simulated.outlier].mean() == pytest.approx(0.0, abs=0.15)

    def test_clean_scenario_has_no_outliers(self, rng):
        simulated = simulate_regression(RegressionDesign.with_size(100, 4), OutlierScenario(), rng)
        assert not simulated.outlier.any()

    def test_deterministic(self):
        first = simulate_regression(RegressionDesign(), OutlierScenario(0.05, 5.0), np.random.default_rng(9))
        second = simulate_regression(RegressionDesign(), OutlierScenario(0.05, 5.0), np.random.default_rng(9))
        np.testing.assert_array_equal(first.dataset.y, second.dataset.y)
        np.testing.assert_array_equal(first.holdout.X, second.holdout.X)


class TestRandomInterceptStudy:
    def test_structure(self, rng):
        simulated = simulate_random_intercept(RandomInterceptDesign(), OutlierScenario(0.05, 10.0), rng)
        data = simulated.dataset
        assert (data.n, data.p, data.n_groups) == (500, 11, 50)
        np.testing.assert_array_equal(np.bincount(data.groups), np.full(50, 10))
        assert len(simulated.truth["random_effects"]) == 50
        assert simulated.holdout is None


class TestRunSimulation:
    def test_writes_files(self, tmp_path):
        paths = run_simulation(OutlierScenario(0.1, 10.0), str(tmp_path), seed=3, n=40, p=3)
        assert set(paths) == {"data", "truth", "holdout"}
        frame = pd.read_csv(os.path.join(tmp_path, DATA_FILE))
        assert list(frame.columns) == ["y", "x1", "x2", "x3", "outlier"]
        assert len(pd.read_csv(os.path.join(tmp_path, HOLDOUT_FILE))) == 20
        truth = load_json(os.path.join(tmp_path, TRUTH_FILE))
        assert truth["n_outliers"] == int(frame["outlier"].sum())
        assert truth["seed"] == 3 and len(truth["beta"]) == 4

    def test_byte_identical_under_seed(self, tmp_path):
        for name in ("a", "b"):
            run_simulation(OutlierScenario(0.05, 15.0), str(tmp_path / name), seed=8, n=30, p=2)
        for file in (DATA_FILE, HOLDOUT_FILE, TRUTH_FILE):
            assert (tmp_path / "a" / file).read_bytes() == (tmp_path / "b" / file).read_bytes()

    def test_random_intercept_design(self, tmp_path):
        paths = run_simulation(OutlierScenario(), str(tmp_path), seed=1, design="ri")
        assert "holdout" not in paths
        assert "group" in pd.read_csv(paths["data"]).columns

    def test_unknown_design(self, tmp_path):
        with pytest.raises(ValidationError):
            run_simulation(OutlierScenario(), str(tmp_path), seed=1, design="panel")
