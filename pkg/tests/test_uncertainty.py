"""Tests for the variance-CDF confidence score."""

import numpy as np
import pytest

from vdpt.data import Cohort
from vdpt.drift import ks_2sample
from vdpt.errors import NotTrained
from vdpt.numeric import SeededRng
from vdpt.uncertainty import VarianceCdf, confidence, fit_variance_cdf
from vdpt.vdp import init_vdp_params, predict_vdp_batch


def _cohort(n, seed):
    rng = SeededRng(seed)
    x = rng.normal(size=(n, 3))
    y = (rng.uniform(size=n) < 0.3).astype(int)
    return Cohort(["a", "b", "c"], x, np.zeros_like(x, dtype=bool), y)


class TestFitVarianceCdf:
    def test_one_value_per_instance(self):
        params = init_vdp_params(3, (4,), 2, SeededRng(0))
        cohort = _cohort(50, 1)
        cdf = fit_variance_cdf(params, cohort)
        assert cdf.n == 50
        assert np.all(np.diff(cdf.values) >= 0)

    def test_refit_identical(self):
        params = init_vdp_params(3, (4,), 2, SeededRng(2))
        cohort = _cohort(30, 3)
        c1 = fit_variance_cdf(params, cohort)
        c2 = fit_variance_cdf(params, cohort)
        np.testing.assert_array_equal(c1.values, c2.values)

    def test_values_equal_direct_predictions(self):
        params = init_vdp_params(3, (4,), 2, SeededRng(4))
        cohort = _cohort(40, 5)
        cdf = fit_variance_cdf(params, cohort)
        _, direct = predict_vdp_batch(params, cohort.x)
        np.testing.assert_array_equal(cdf.values, np.sort(direct))

    def test_not_trained(self):
        with pytest.raises(NotTrained):
            fit_variance_cdf(None, _cohort(20, 6))


class TestConfidence:
    def _cdf(self):
        return VarianceCdf(np.arange(1.0, 13.0))  # 12 values

    def test_below_minimum_full_confidence(self):
        assert confidence(self._cdf(), 0.5) == 1.0

    def test_above_maximum_zero_confidence(self):
        assert confidence(self._cdf(), 99.0) == 0.0

    def test_interpolation_hand_case(self):
        # spec-style worked example on {1,2,3,4}: CDF(2.5) interpolates the
        # plotting positions 2/5 and 3/5 to exactly 0.5
        cdf = VarianceCdf.__new__(VarianceCdf)
        cdf.values = np.array([1.0, 2.0, 3.0, 4.0])
        assert confidence(cdf, 2.5) == pytest.approx(0.5)

    def test_monotone_nonincreasing(self):
        cdf = VarianceCdf(np.sort(SeededRng(7).uniform(0, 5, size=40)))
        grid = np.linspace(-0.0, 6.0, 300)
        vals = [confidence(cdf, float(g)) for g in grid]
        assert np.all(np.diff(vals) <= 1e-15)

    def test_probability_integral_transform_uniformity(self):
        # confidences of a fresh sample from the fitting distribution are
        # approximately Uniform(0,1): KS vs a uniform grid fails to reject
        rng = SeededRng(8)
        fit_sample = np.exp(rng.normal(size=2000))
        fresh = np.exp(rng.normal(size=2000))
        cdf = VarianceCdf(fit_sample)
        conf = np.array([confidence(cdf, v) for v in fresh])
        grid = np.linspace(0.0, 1.0, 2000)
        _, p = ks_2sample(conf, grid)
        assert p > 0.01

    def test_too_few_values(self):
        with pytest.raises(ValueError):
            VarianceCdf(np.arange(5.0))

    def test_negative_variance_rejected(self):
        with pytest.raises(ValueError):
            confidence(self._cdf(), -1.0)
