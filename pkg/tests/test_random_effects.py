import math

import numpy as np
import pytest

from ehreg.errors import ValidationError
from ehreg.model import Dataset, ModelSpec, PriorConfig, RandomEffectSpec, initial_state, parse_model_flag, validate
from ehreg.samplers import chain, random_effects, run_model


def _intercept_data(seed=12, n_groups=20, per_group=10, tau_v=1.5):
    rng = np.random.default_rng(seed)
    groups = np.repeat(np.arange(n_groups), per_group)
    n = groups.shape[0]
    effects = tau_v * rng.standard_normal(n_groups)
    X = np.column_stack([np.ones(n), rng.standard_normal(n)])
    y = X @ np.array([0.5, 1.0]) + effects[groups] + 0.5 * rng.standard_normal(n)
    return Dataset(y=y, X=X, groups=groups, has_intercept=True), effects


def _spatial_data(seed=4, n=30):
    rng = np.random.default_rng(seed)
    coords = rng.uniform(0.0, 1.0, size=(n, 2))
    X = np.column_stack([np.ones(n), rng.standard_normal(n)])
    field = np.sin(3.0 * coords[:, 0]) + np.cos(3.0 * coords[:, 1])
    y = X @ np.array([1.0, 0.5]) + field + 0.2 * rng.standard_normal(n)
    return Dataset(y=y, X=X, coords=coords, has_intercept=True)


def _handle(data, kind, flag="eh"):
    return validate(PriorConfig(), data, parse_model_flag(flag, random_effect=RandomEffectSpec(kind)))


class TestRandomIntercept:
    def test_conditional_by_hand(self):
        data = Dataset(y=[1.0, 3.0, -2.0], X=np.zeros((3, 1)), groups=[0, 0, 1])
        handle = _handle(data, "intercept")
        state = initial_state(handle)
        state.tau_v2, state.sigma2 = 2.0, 0.5
        mean, variance = random_effects.intercept_conditional(state, handle)
        precision = np.array([0.5 + 2 / 0.5, 0.5 + 1 / 0.5])
        np.testing.assert_allclose(variance, 1.0 / precision)
        np.testing.assert_allclose(mean, np.array([4.0 / 0.5, -2.0 / 0.5]) / precision)

    def test_heavy_rows_are_downweighted(self):
        data = Dataset(y=[1.0, 3.0, -2.0], X=np.zeros((3, 1)), groups=[0, 0, 1])
        handle = _handle(data, "intercept")
        state = initial_state(handle)
        state.z[1], state.u[1] = 1, 100.0
        _, variance = random_effects.intercept_conditional(state, handle)
        expected = 1.0 / (1.0 + (1.0 + 0.01) / state.sigma2)
        assert variance[0] == pytest.approx(expected)

    def test_tau_v2_conditional(self):
        data = Dataset(y=np.zeros(4), X=np.zeros((4, 1)), groups=[0, 1, 2, 2])
        handle = _handle(data, "intercept")
        state = initial_state(handle)
        state.b = np.array([1.0, -2.0, 0.5])
        assert random_effects.tau_v2_conditional(state, handle) == (1.0 + 1.5, 1.0 + 0.5 * 5.25)

    def test_chain_recovers_effects(self):
        data, effects = _intercept_data()
        output = run_model(_handle(data, "intercept"), n_iter=1500, burn_in=500, seed=3)
        estimates = output["b"].mean(axis=0)
        assert np.corrcoef(estimates, effects)[0, 1] > 0.8
        assert "tau_v2" in output.columns() and output["b"].shape[1] == 20


class TestSpatialField:
    def test_median_distance(self):
        corners = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        assert random_effects.median_pairwise_distance(corners) == pytest.approx(1.0)

    @pytest.mark.parametrize("proposal, folded", [(-0.3, 0.3), (1.4, 0.6), (2.5, 0.5), (0.4, 0.4)])
    def test_reflection(self, proposal, folded):
        assert random_effects.reflect(proposal, 1.0) == pytest.approx(folded)

    def test_factor_is_cached_per_bandwidth(self):
        handle = _handle(_spatial_data(n=8), "spatial")
        ctx = chain.SweepContext.from_seed(0)
        first = random_effects.spatial_factor(handle, ctx, 0.3)
        assert random_effects.spatial_factor(handle, ctx, 0.3) is first
        other = random_effects.spatial_factor(handle, ctx, 0.5)
        assert other is not first
        squared = ctx.cache["squared_distances"]
        np.testing.assert_allclose(other @ other.T, np.exp(-squared / 0.5) + 1e-8 * np.eye(8), atol=1e-12)

    def test_conditional_matches_precision_form(self):
        data = _spatial_data(n=6)
        handle = _handle(data, "spatial")
        state = initial_state(handle)
        state.kappa2, state.sigma2 = 1.3, 0.4
        state.z[:2], state.u[:2] = 1, np.array([5.0, 0.5])
        factor = random_effects.spatial_factor(handle, chain.SweepContext.from_seed(0), 0.15)
        mean, cov = random_effects.spatial_field_conditional(state, handle, factor)

        weights = chain.observation_weights(state)
        precision = np.linalg.inv(state.kappa2 * factor @ factor.T) + np.diag(weights) / state.sigma2
        expected_cov = np.linalg.inv(precision)
        target = data.y - data.X @ state.beta
        np.testing.assert_allclose(cov, expected_cov, atol=1e-6)
        np.testing.assert_allclose(mean, expected_cov @ (weights * target / state.sigma2), atol=1e-6)

    def test_conditioned_draws_have_conditional_moments(self, rng):
        data = _spatial_data(n=4)
        handle = _handle(data, "spatial")
        state = initial_state(handle)
        state.kappa2, state.sigma2 = 0.8, 0.3
        factor = random_effects.spatial_factor(handle, chain.SweepContext.from_seed(0), 0.6)
        mean, cov = random_effects.spatial_field_conditional(state, handle, factor)
        draws = np.array([random_effects.update_spatial_field(state, handle, rng, factor) for _ in range(40_000)])
        np.testing.assert_allclose(draws.mean(axis=0), mean, atol=0.02)
        np.testing.assert_allclose(np.cov(draws.T), cov, atol=0.02)

    def test_kappa2_conditional(self):
        handle = _handle(_spatial_data(n=5), "spatial")
        state = initial_state(handle)
        factor = np.eye(5) * math.sqrt(2.0)
        state.b = np.array([1.0, 0.0, -1.0, 2.0, 0.0])
        assert random_effects.kappa2_conditional(state, handle, factor) == pytest.approx((1.0 + 2.5, 1.0 + 0.25 * 6.0))

    def test_chain_keeps_bandwidth_in_range(self):
        handle = _handle(_spatial_data(), "spatial")
        output = run_model(handle, n_iter=300, burn_in=100, seed=5)
        h = output.scalar("h")
        assert np.all((h > 0) & (h < handle.h_max))
        assert output.acceptance_rate is not None and 0.0 < output.acceptance_rate <= 1.0
        assert output["b"].shape == (200, 30)
        assert {"kappa2", "h"} <= set(output.columns())

    def test_spatial_spec_requires_coordinates(self):
        data = _spatial_data(n=5)
        data.coords = None
        with pytest.raises(ValidationError):
            validate(PriorConfig(), data, ModelSpec(random_effect=RandomEffectSpec("spatial")))
