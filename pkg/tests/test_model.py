import numpy as np
import pytest

from ehreg.errors import InsufficientDrawsError, ValidationError
from ehreg.model import (
    ChainOutput,
    Dataset,
    ModelSpec,
    OutlierProbe,
    OutlierScenario,
    PriorConfig,
    RandomEffectSpec,
    SIMULATION_SCENARIOS,
    initial_state,
    load_prior,
    parse_model_flag,
    parse_scenario,
    validate,
)


class TestDataset:
    def test_shapes_and_incidence(self):
        data = Dataset(y=[1.0, 2.0, 3.0], X=np.ones((3, 2)), groups=[0, 1, 1])
        assert (data.n, data.p, data.n_groups) == (3, 2, 2)
        np.testing.assert_array_equal(data.G, [[1, 0], [0, 1], [0, 1]])
        assert data.covariate_names == ["x0", "x1"]

    def test_vector_design_becomes_column(self):
        data = Dataset(y=[1.0, 2.0], X=[0.5, 1.5])
        assert data.X.shape == (2, 1)

    def test_copy_is_independent(self):
        data = Dataset(y=[1.0, 2.0], X=np.ones((2, 1)))
        clone = data.copy()
        clone.y[0] = 99.0
        assert data.y[0] == 1.0


class TestPriorConfig:
    def test_defaults(self):
        prior = PriorConfig()
        mean, cov = prior.beta_prior(3)
        np.testing.assert_array_equal(mean, np.zeros(3))
        np.testing.assert_array_equal(cov, 1000.0 * np.eye(3))
        assert (prior.a_sigma, prior.b_sigma, prior.gamma, prior.A_alpha) == (1.0, 1.0, 1.0, 1000.0)

    def test_unknown_keys_rejected(self):
        with pytest.raises(ValidationError) as info:
            PriorConfig.from_dict({"a_sigma": 2.0, "sigma_shape": 1.0})
        assert "unknown key sigma_shape" in info.value.violations

    def test_all_violations_collected(self):
        with pytest.raises(ValidationError) as info:
            PriorConfig.from_dict({"a_sigma": -1.0, "b_s": 0.0, "fix_s": 1.5})
        assert len(info.value.violations) == 3

    def test_json_round_trip(self, tmp_path):
        prior = PriorConfig(beta_variance=10.0, a_s=1.0, b_s=9.0, fix_s=0.1, adaptive_gamma=True, mh_step=0.123456789)
        path = tmp_path / "prior.json"
        prior.to_json(str(path))
        assert PriorConfig.from_json(str(path)) == prior
        assert load_prior(str(path)) == prior
        assert load_prior() == PriorConfig()


class TestModelFlags:
    @pytest.mark.parametrize("flag, model, df, tag", [
        ("eh", "eh", None, "eh"),
        ("AEH", "aeh", None, "aeh"),
        ("t", "t", 3.0, "t:3"),
        ("t:2.1", "t", 2.1, "t:2.1"),
        ("t:1", "t", 1.0, "t:1"),
        ("mt", "mt", 0.5, "mt:0.5"),
        ("at", "at", None, "at"),
        ("normal", "normal", None, "normal"),
    ])
    def test_parse(self, flag, model, df, tag):
        spec = parse_model_flag(flag)
        assert (spec.error_model, spec.df, spec.tag) == (model, df, tag)

    @pytest.mark.parametrize("flag", ["lptn", "eh:3", "t:abc"])
    def test_bad_flags(self, flag):
        with pytest.raises(ValidationError):
            parse_model_flag(flag)

    def test_bad_prior_kind(self):
        with pytest.raises(ValidationError):
            parse_model_flag("eh", prior_kind="laplace")

    def test_bad_random_effect_kind(self):
        with pytest.raises(ValidationError):
            RandomEffectSpec("slope")


class TestValidate:
    def test_collects_every_violation(self, small_regression):
        data = small_regression.copy()
        data.y[3] = np.nan
        prior = PriorConfig(b_sigma=-1.0)
        with pytest.raises(ValidationError) as info:
            validate(prior, data, ModelSpec())
        assert len(info.value.violations) >= 2

    def test_non_spd_prior_covariance(self, small_regression):
        prior = PriorConfig(beta_cov=[[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        with pytest.raises(ValidationError) as info:
            validate(prior, small_regression, ModelSpec())
        assert any("B_beta" in v for v in info.value.violations)

    def test_horseshoe_rejects_intercept_column(self, small_regression):
        with pytest.raises(ValidationError):
            validate(PriorConfig(), small_regression, ModelSpec(prior_kind="horseshoe"))

    def test_rank_deficiency_is_a_warning(self, rng):
        x = rng.standard_normal(20)
        data = Dataset(y=rng.standard_normal(20), X=np.column_stack([np.ones(20), x, 2.0 * x]))
        handle = validate(PriorConfig(), data, ModelSpec())
        assert any("rank" in w for w in handle.warnings)

    def test_probe_condition_is_a_warning(self):
        data = Dataset(y=[1.0, 2.0, 3.0], X=np.column_stack([np.ones(3), [0.0, 1.0, 2.0]]))
        probe = OutlierProbe(indices=(2,), a=(0.0,), b=(1.0,))
        handle = validate(PriorConfig(), data, ModelSpec(), probe)
        assert any("(A.1)" in w for w in handle.warnings)

    def test_probe_index_out_of_range(self, small_regression):
        probe = OutlierProbe(indices=(500,), a=(0.0,), b=(1.0,))
        with pytest.raises(ValidationError):
            validate(PriorConfig(), small_regression, ModelSpec(), probe)

    def test_random_intercept_needs_groups(self, small_regression):
        with pytest.raises(ValidationError):
            validate(PriorConfig(), small_regression, ModelSpec(random_effect=RandomEffectSpec("intercept")))

    def test_spatial_checks(self, small_regression):
        spec = ModelSpec(random_effect=RandomEffectSpec("spatial"))
        with pytest.raises(ValidationError):
            validate(PriorConfig(), small_regression, spec)
        data = small_regression.copy()
        data.coords = np.zeros((data.n, 2))
        with pytest.raises(ValidationError):
            validate(PriorConfig(), data, spec)

    def test_spatial_bandwidth_bound_is_median_distance(self):
        coords = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        data = Dataset(y=np.zeros(4), X=np.ones((4, 1)), coords=coords)
        handle = validate(PriorConfig(), data, ModelSpec(random_effect=RandomEffectSpec("spatial")))
        assert handle.h_max == pytest.approx(1.0)

    def test_prior_precision(self, small_regression):
        handle = validate(PriorConfig(beta_variance=4.0), small_regression, ModelSpec())
        np.testing.assert_allclose(handle.beta_prior_precision, 0.25 * np.eye(3))
        np.testing.assert_allclose(handle.beta_prior_linear, np.zeros(3))


class TestInitialState:
    def test_eh_start(self, small_regression):
        state = initial_state(validate(PriorConfig(), small_regression, ModelSpec()))
        assert np.all(state.z == 0) and np.all(state.u == 1.0)
        assert state.s == 0.5 and state.gamma == 1.0
        np.testing.assert_allclose(state.beta, np.linalg.lstsq(small_regression.X, small_regression.y, rcond=None)[0])

    def test_t_start_uses_heavy_labels(self, small_regression):
        state = initial_state(validate(PriorConfig(), small_regression, parse_model_flag("t:5")))
        assert np.all(state.z == 1) and state.df == 5.0

    def test_adaptive_t_starts_at_largest_df(self, small_regression):
        state = initial_state(validate(PriorConfig(), small_regression, parse_model_flag("at")))
        assert state.df == 50.0

    def test_fixed_s(self, small_regression):
        state = initial_state(validate(PriorConfig(fix_s=0.0), small_regression, ModelSpec()))
        assert state.s == 0.0

    def test_random_intercepts_start_at_zero(self, small_regression):
        data = small_regression.copy()
        data.groups = np.arange(data.n) % 6
        spec = ModelSpec(random_effect=RandomEffectSpec("intercept"))
        state = initial_state(validate(PriorConfig(), data, spec))
        np.testing.assert_array_equal(state.b, np.zeros(6))


class TestChainOutput:
    def _output(self, n=120):
        draws = {"beta": np.arange(2.0 * n).reshape(n, 2), "sigma2": np.ones((n, 1)), "z": np.zeros((n, 1))}
        return ChainOutput(draws=draws, n_iter=n + 30, burn_in=30, thin=1, seed=4, model_tag="eh")

    def test_columns_and_frame(self):
        output = self._output()
        assert output.columns() == ["beta[0]", "beta[1]", "sigma2", "z[0]"]
        frame = output.to_frame()
        assert list(frame.columns) == output.columns() and len(frame) == output.n_retained == 120

    def test_frame_round_trip(self):
        output = self._output()
        rebuilt = ChainOutput.from_frame(output.to_frame(), output.metadata())
        np.testing.assert_array_equal(rebuilt["beta"], output["beta"])
        assert rebuilt.model_tag == "eh" and rebuilt.n_retained == 120

    def test_row_count_mismatch(self):
        output = self._output()
        with pytest.raises(InsufficientDrawsError):
            ChainOutput.from_frame(output.to_frame().iloc[:50], output.metadata())


class TestOutliers:
    def test_probe_sets_rows(self):
        probe = OutlierProbe(indices=(0, 2), a=(1.0, 0.0), b=(1.0, -2.0))
        y = probe.apply(np.zeros(4), magnitude=10.0)
        np.testing.assert_array_equal(y, [11.0, 0.0, -20.0, 0.0])

    def test_probe_checks(self):
        with pytest.raises(ValidationError):
            OutlierProbe(indices=(0, 1), a=(0.0,), b=(1.0,))
        with pytest.raises(ValidationError):
            OutlierProbe(indices=(0,), a=(0.0,), b=(0.0,))
        with pytest.raises(ValidationError):
            OutlierProbe(indices=(1, 1), a=(0.0, 0.0), b=(1.0, 1.0))

    def test_scenario_labels(self):
        assert [s.label for s in SIMULATION_SCENARIOS][:3] == ["(0,--)", "(5,5)", "(10,5)"]
        assert len(SIMULATION_SCENARIOS) == 9

    @pytest.mark.parametrize("text, ratio, shift", [("10,20", 0.1, 20.0), ("(5,15)", 0.05, 15.0),
                                                     ("0", 0.0, 0.0), ("0,--", 0.0, 0.0)])
    def test_parse_scenario(self, text, ratio, shift):
        scenario = parse_scenario(text)
        assert scenario.contamination_ratio == pytest.approx(ratio)
        assert scenario.shift_mu == shift

    def test_bad_scenarios(self):
        with pytest.raises(ValidationError):
            parse_scenario("many")
        with pytest.raises(ValidationError):
            OutlierScenario(1.0, 5.0)
