import math

import numpy as np
import pytest
from scipy import stats

from conftest import make_regression
from ehreg.analysis.metrics import (
    average_inefficiency,
    batch_means_variance,
    coefficient_metrics,
    dic,
    gelman_rubin,
    inefficiency_factor,
    mc_standard_error,
    pointwise_log_likelihood,
    predict_clean,
    predictive_metrics,
    rmspe,
    summarize,
)
from ehreg.errors import InsufficientDrawsError, ValidationError
from ehreg.model import ChainOutput


def _output(draws, tag="normal", prior_kind="normal"):
    n = next(iter(draws.values())).shape[0]
    return ChainOutput(draws=draws, n_iter=n, burn_in=0, thin=1, seed=0, model_tag=tag, prior_kind=prior_kind)


def _ar1(rng, phi, n):
    x = np.empty(n)
    x[0] = rng.standard_normal()
    noise = rng.standard_normal(n)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + noise[t]
    return x


class TestSummaries:
    def test_equal_tailed_interval(self):
        summary = summarize(np.arange(1.0, 1001.0))
        assert summary.mean[0] == pytest.approx(500.5)
        assert summary.lower[0] == pytest.approx(25.975)
        assert summary.upper[0] == pytest.approx(975.025)
        assert summary.length[0] == pytest.approx(949.05)

    def test_columns_are_independent(self, rng):
        draws = np.column_stack([rng.standard_normal(500), 10.0 + rng.standard_normal(500)])
        summary = summarize(draws, level=0.9)
        assert summary.mean.shape == (2,)
        assert summary.lower[1] > summary.upper[0]

    def test_too_few_draws(self):
        with pytest.raises(InsufficientDrawsError):
            summarize(np.zeros(50))


class TestInefficiency:
    def test_iid_trace(self, rng):
        assert inefficiency_factor(rng.standard_normal(5000)) == pytest.approx(1.0, abs=0.3)

    def test_ar1_trace(self, rng):
        # (1 + phi) / (1 - phi)
        assert inefficiency_factor(_ar1(rng, 0.5, 20_000)) == pytest.approx(3.0, abs=0.5)

    def test_constant_and_alternating(self):
        assert inefficiency_factor(np.full(300, 2.0)) == 1.0
        assert inefficiency_factor(np.tile([1.0, -1.0], 500)) < 0.1

    def test_short_trace(self, rng):
        with pytest.raises(InsufficientDrawsError):
            inefficiency_factor(rng.standard_normal(150))

    def test_batch_means_variance(self, rng):
        # var(x) = 4/3 and IF = 3 at phi = 0.5
        trace = _ar1(rng, 0.5, 100_000)
        assert batch_means_variance(trace, n_batches=400) == pytest.approx(4.0 / 100_000, rel=0.25)
        assert batch_means_variance(np.full(300, 2.0)) == 0.0
        with pytest.raises(InsufficientDrawsError):
            batch_means_variance(rng.standard_normal(150))

    def test_standard_error(self, rng):
        trace = rng.standard_normal(4000)
        assert mc_standard_error(trace) == pytest.approx(1.0 / math.sqrt(4000), rel=0.25)

    def test_average_over_coefficients(self, rng):
        output = _output({"beta": np.column_stack([np.full(300, 1.0), np.full(300, 3.0)])})
        assert average_inefficiency(output) == 1.0

    def test_gelman_rubin(self, rng):
        mixed = rng.standard_normal((4, 2000))
        assert gelman_rubin(mixed) == pytest.approx(1.0, abs=0.01)
        stuck = mixed + np.arange(4)[:, None] * 3.0
        assert gelman_rubin(stuck) > 1.5
        with pytest.raises(ValidationError):
            gelman_rubin(mixed[:1])


class TestAccuracy:
    def test_coefficient_metrics(self):
        estimates = np.array([[1.0, 2.0], [3.0, 2.0]])
        lowers = np.array([[0.0, 1.0], [2.5, 2.5]])
        uppers = np.array([[3.0, 3.0], [4.0, 3.5]])
        report = coefficient_metrics(estimates, lowers, uppers, [2.0, 2.0])
        np.testing.assert_allclose(report.rmse, [1.0, 0.0])
        np.testing.assert_allclose(report.cp, [0.5, 0.5])
        np.testing.assert_allclose(report.al, [2.25, 1.5])
        assert (report.rmse_avg, report.cp_avg, report.al_avg) == (0.5, 0.5, 1.875)
        assert report.to_dict()["al_avg"] == 1.875

    def test_predictive_metrics_pool_points(self):
        report = predictive_metrics([[0.0, 1.0], [2.0, 3.0]], [[-1.0, 0.0], [0.0, 3.5]],
                                    [[1.0, 2.0], [4.0, 4.0]], [[0.0, 1.0], [2.0, 1.0]])
        assert report.rmse_avg == pytest.approx(1.0)
        assert report.cp_avg == 0.75
        assert report.al_avg == pytest.approx(2.125)

    def test_rmspe(self):
        assert rmspe([1.0, 2.0, 3.0], [1.0, 0.0, 3.0]) == pytest.approx(math.sqrt(4.0 / 3.0))


class TestPrediction:
    def test_clean_prediction_collapses_without_noise(self, rng):
        beta = np.tile([1.0, 2.0], (200, 1))
        output = _output({"beta": beta, "sigma2": np.full((200, 1), 1e-20)})
        x_new = np.array([[1.0, 0.5], [1.0, -1.0]])
        summary, draws = predict_clean(output, x_new, rng)
        assert draws.shape == (200, 2)
        np.testing.assert_allclose(summary.mean, [2.0, -1.0], atol=1e-8)
        np.testing.assert_allclose(summary.length, 0.0, atol=1e-8)

    def test_horseshoe_intercept_is_added(self, rng):
        output = _output({"beta": np.ones((200, 1)), "alpha": np.full((200, 1), 4.0),
                          "sigma2": np.full((200, 1), 1e-20)}, prior_kind="horseshoe")
        summary, _ = predict_clean(output, [[2.0]], rng)
        assert summary.mean[0] == pytest.approx(6.0)

    def test_clean_interval_width(self, rng):
        output = _output({"beta": np.zeros((20_000, 1)), "sigma2": np.full((20_000, 1), 4.0)})
        summary, _ = predict_clean(output, [[1.0]], rng)
        assert summary.length[0] == pytest.approx(2.0 * 1.959964 * 2.0, rel=0.03)


class TestDic:
    def _normal_output(self, data, rng, n_draws=200):
        ols = np.linalg.lstsq(data.X, data.y, rcond=None)[0]
        beta = ols + 0.05 * rng.standard_normal((n_draws, data.p))
        sigma2 = 0.25 * np.exp(0.1 * rng.standard_normal((n_draws, 1)))
        return _output({"beta": beta, "sigma2": sigma2})

    def test_normal_dic_by_hand(self, rng):
        data = make_regression(n=40)
        output = self._normal_output(data, rng)
        beta, sigma = output["beta"], np.sqrt(output["sigma2"])
        deviance = np.array([-2.0 * np.sum(stats.norm.logpdf(data.y, data.X @ b, s)) for b, s in zip(beta, sigma[:, 0])])
        plug_in = -2.0 * np.sum(stats.norm.logpdf(data.y, data.X @ beta.mean(0), math.sqrt(output["sigma2"].mean())))
        assert dic(output, data) == pytest.approx(2.0 * deviance.mean() - plug_in, rel=1e-10)

    def test_eh_without_heavy_component_matches_normal(self, rng):
        data = make_regression(n=40)
        normal = self._normal_output(data, rng)
        draws = dict(normal.draws, s=np.zeros((200, 1)), gamma=np.ones((200, 1)))
        assert dic(_output(draws, tag="eh"), data) == pytest.approx(dic(normal, data), rel=1e-12)

    def test_t_likelihood(self, rng):
        data = make_regression(n=10)
        draws = {"beta": np.zeros((3, 3)), "sigma2": np.full((3, 1), 4.0)}
        expected = np.sum(stats.t.logpdf(data.y / 2.0, 3.0) - math.log(2.0))
        np.testing.assert_allclose(pointwise_log_likelihood(draws, data, "t:3"), expected, rtol=1e-12)

    def test_subsampled_draws(self, rng):
        data = make_regression(n=40)
        output = self._normal_output(data, rng, n_draws=400)
        assert np.isfinite(dic(output, data, max_draws=150, seed=2))
