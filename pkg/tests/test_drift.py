"""Tests for the dataset-shift battery: KS, chi-square, and drift_report."""

import numpy as np
import pytest

from vdpt.data import ShiftSpec, generate_synthetic_cohort
from vdpt.drift import (
    chi2_label_test,
    chi2_sf_1df,
    drift_report,
    kolmogorov_sf,
    ks_2sample,
)
from vdpt.errors import SchemaMismatch, TooFewSamples, ZeroExpected
from vdpt.numeric import SeededRng


def kolmogorov_sf_theta_oracle(lam, terms=200):
    """High-precision oracle via the Jacobi-theta form of the Kolmogorov CDF:
    P(K <= x) = sqrt(2*pi)/x * sum_{k>=1} exp(-(2k-1)^2 pi^2 / (8 x^2))."""
    import mpmath

    mpmath.mp.dps = 50
    x = mpmath.mpf(lam)
    if x <= 0:
        return 1.0
    s = mpmath.mpf(0)
    for k in range(1, terms + 1):
        s += mpmath.exp(-((2 * k - 1) ** 2) * mpmath.pi**2 / (8 * x * x))
    cdf = mpmath.sqrt(2 * mpmath.pi) / x * s
    return float(1 - cdf)


def chi2_sf_quadrature_oracle(value):
    """Numerical integration of the chi-square(1) density over [value, inf)."""
    import mpmath

    mpmath.mp.dps = 50
    pdf = lambda t: mpmath.exp(-t / 2) / (mpmath.sqrt(2 * t) * mpmath.gamma(mpmath.mpf(1) / 2))
    return float(mpmath.quad(pdf, [value, mpmath.inf]))


class TestKs2Sample:
    def test_equal_samples(self):
        a = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        d, p = ks_2sample(a, a)
        assert d == 0.0
        assert p == 1.0

    def test_disjoint_supports(self):
        a = np.arange(5.0)
        b = np.arange(10.0, 15.0)
        d, _ = ks_2sample(a, b)
        assert d == 1.0

    def test_interleaved_hand_case(self):
        a = np.array([1.0, 2.0, 3.0] * 2)[:5]  # need >=5 per side
        # exact spec case uses 3 points; verify D on padded-equivalent below
        d, _ = ks_2sample([1, 2, 3, 1, 2], [1.5, 2.5, 3.5, 1.5, 2.5])
        assert 0 < d < 1

    def test_exhaustive_ecdf_hand_case(self):
        # the 3-vs-3 case evaluated exhaustively by hand: D = 1/3
        a = np.array([1.0, 2.0, 3.0])
        b = np.array([1.5, 2.5, 3.5])
        pooled = np.sort(np.concatenate([a, b]))
        d_hand = max(
            abs((a <= t).mean() - (b <= t).mean()) for t in pooled
        )
        assert d_hand == pytest.approx(1 / 3)
        # the implementation refuses n<5, so check via padding both samples
        # with far-away equal tails that cannot change the sup distance ratio
        a5 = np.concatenate([a, [100.0, 101.0, 102.0]])
        b5 = np.concatenate([b, [100.0, 101.0, 102.0]])
        d, _ = ks_2sample(a5, b5)
        assert d == pytest.approx(1 / 6)

    def test_too_few(self):
        with pytest.raises(TooFewSamples):
            ks_2sample([1.0, 2.0], [1.0, 2.0, 3.0, 4.0, 5.0])

    def test_monotone_transform_invariance(self):
        rng = SeededRng(0)
        a = rng.normal(size=40)
        b = rng.normal(0.5, 1.2, size=60)
        d1, p1 = ks_2sample(a, b)
        f = lambda v: np.exp(v) + v**3
        d2, p2 = ks_2sample(f(a), f(b))
        assert d1 == pytest.approx(d2, abs=1e-15)
        assert p1 == pytest.approx(p2, abs=1e-15)

    def test_p_value_against_theta_oracle(self):
        for lam in (0.3, 0.5, 0.8, 1.0, 1.2, 1.5, 2.0, 2.5):
            assert kolmogorov_sf(lam) == pytest.approx(
                kolmogorov_sf_theta_oracle(lam), abs=1e-3
            )


class TestChi2LabelTest:
    def test_exact_match_gives_zero(self):
        chi2, p = chi2_label_test((90, 10), (0.9, 0.1))
        assert chi2 == 0.0
        assert p == 1.0

    def test_2021_style_cohort_flags(self):
        # 21 outcomes at ~80% positive against an 8% training prevalence
        chi2, p = chi2_label_test((4, 17), (0.92, 0.08))
        assert p < 0.01

    def test_hand_arithmetic(self):
        chi2, _ = chi2_label_test((50, 50), (0.9, 0.1))
        assert chi2 == pytest.approx((50 - 90) ** 2 / 90 + (50 - 10) ** 2 / 10)
        assert chi2 == pytest.approx(177.777777, abs=1e-4)

    def test_zero_expected(self):
        with pytest.raises(ZeroExpected):
            chi2_label_test((5, 5), (1.0, 0.0))

    def test_too_few(self):
        with pytest.raises(TooFewSamples):
            chi2_label_test((2, 1), (0.5, 0.5))

    def test_p_against_quadrature_oracle(self):
        for v in (0.1, 0.5, 1.0, 2.0, 3.84, 6.63, 10.0, 15.0):
            assert chi2_sf_1df(v) == pytest.approx(chi2_sf_quadrature_oracle(v), abs=1e-3)


class TestDriftReport:
    def test_bootstrap_null_no_flags(self):
        ref = generate_synthetic_cohort(2000, 0.1, rng=SeededRng(21))
        rng = SeededRng(22)
        idx = rng.integers(0, ref.n_rows, size=500)
        current = ref.take(idx)
        report = drift_report(ref, current)
        assert report.flagged_features == []

    def test_shifted_feature_flagged_exclusively(self):
        ref = generate_synthetic_cohort(4000, 0.08, rng=SeededRng(31))
        cur = generate_synthetic_cohort(
            500,
            0.08,
            shift_spec=ShiftSpec(feature_shifts={"lactate": 1.0}),
            rng=SeededRng(32),
        )
        report = drift_report(ref, cur)
        assert report.flagged_features == ["lactate"]
        lact = next(f for f in report.features if f.name == "lactate")
        assert lact.kde is not None
        assert len(lact.kde["grid"]) == len(lact.kde["reference"])

    def test_label_shift_flagged(self):
        ref = generate_synthetic_cohort(4000, 0.08, rng=SeededRng(41))
        cur = generate_synthetic_cohort(
            500, 0.08, shift_spec=ShiftSpec(prevalence=0.5), rng=SeededRng(42)
        )
        report = drift_report(ref, cur)
        assert report.label_flagged
        assert report.label_p < 0.01

    def test_binary_feature_uses_chi2_not_ks(self):
        ref = generate_synthetic_cohort(2000, 0.1, rng=SeededRng(51))
        cur = generate_synthetic_cohort(500, 0.1, rng=SeededRng(52))
        report = drift_report(ref, cur)
        kinds = {f.name: f.kind for f in report.features}
        assert kinds["mech_vent"] == "binary-chi2"
        assert kinds["lactate"] == "ks"

    def test_empty_current_rejected(self):
        ref = generate_synthetic_cohort(100, 0.2, rng=SeededRng(61))
        empty = ref.take(np.array([], dtype=int))
        with pytest.raises(TooFewSamples):
            drift_report(ref, empty)

    def test_schema_mismatch(self):
        ref = generate_synthetic_cohort(100, 0.2, rng=SeededRng(71))
        other = generate_synthetic_cohort(100, 0.2, rng=SeededRng(72))
        other.feature_names = list(other.feature_names)
        other.feature_names[0] = "renamed"
        with pytest.raises(SchemaMismatch):
            drift_report(ref, other)

    def test_report_serializes(self):
        import json

        ref = generate_synthetic_cohort(500, 0.2, rng=SeededRng(81))
        cur = generate_synthetic_cohort(200, 0.2, rng=SeededRng(82))
        report = drift_report(ref, cur)
        blob = json.dumps(report.to_dict())
        assert "vdpt.drift-report/1" in blob
