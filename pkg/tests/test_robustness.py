import numpy as np
import pytest

from conftest import make_regression
from ehreg.analysis.robustness import delta_ratio_probe, drop_rows, robustness_sweep
from ehreg.model import Dataset, OutlierProbe, parse_model_flag


class TestDeltaRatio:
    @pytest.mark.parametrize("delta, sigma, target", [(0.0, 2.0, 1.0), (1.0, 2.0, 4.0), (0.5, 0.5, 0.5)])
    def test_ratio_approaches_power_of_sigma(self, delta, sigma, target):
        frame = delta_ratio_probe(0.5, delta, [sigma], 1e6)
        row = frame.iloc[0]
        assert row["target"] == pytest.approx(target)
        assert row["relative_error"] < 0.10

    def test_scale_invariance_far_out(self):
        frame = delta_ratio_probe(0.5, 0.0, [0.5, 2.0, 4.0], 1e30)
        assert list(frame.columns) == ["sigma", "ratio", "target", "relative_error"]
        assert np.all(frame["relative_error"] < 0.05)


class TestRobustnessSweep:
    def test_drop_rows(self):
        data = Dataset(y=[1.0, 2.0, 3.0], X=np.eye(3), groups=[0, 1, 1])
        kept = drop_rows(data, [1])
        np.testing.assert_array_equal(kept.y, [1.0, 3.0])
        np.testing.assert_array_equal(kept.groups, [0, 1])

    def test_normal_is_dragged_and_eh_is_not(self):
        data = make_regression(seed=21, n=60)
        probe = OutlierProbe(indices=(0,), a=(0.0,), b=(1.0,))
        settings = dict(magnitudes=(1e2, 1e4), n_iter=1500, burn_in=500, seed=2)
        normal = robustness_sweep(data, probe, parse_model_flag("normal"), **settings)
        robust = robustness_sweep(data, probe, parse_model_flag("eh"), **settings)

        assert list(normal.columns) == ["magnitude", "distance", "mc_se"]
        assert normal["distance"].iloc[1] >= 10.0 * normal["distance"].iloc[0]
        assert robust["distance"].iloc[1] < 0.01 * normal["distance"].iloc[1]
        assert robust["distance"].iloc[1] < 0.5
        assert np.all(robust["mc_se"] > 0)
