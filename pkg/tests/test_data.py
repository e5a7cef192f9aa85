"""Tests for cohort I/O, the synthetic generator, imputation,
standardization, feature selection, and rebalancing."""

import numpy as np
import pytest

from vdpt.data import (
    ChainedImputer,
    Cohort,
    ShiftSpec,
    SYNTHETIC_FEATURES,
    generate_synthetic_cohort,
    impute_chained,
    load_csv,
    mutual_information_nats,
    rebalance,
    save_csv,
    select_features,
    standardize_apply,
    standardize_fit,
)
from vdpt.drift import ks_2sample
from vdpt.errors import (
    AllMissingFeature,
    InvalidLabel,
    InvalidSpec,
    MissingLabel,
    NotFitted,
    ParseError,
    TooFewMinority,
)
from vdpt.numeric import SeededRng, fractional_ranks


def roc_auc_bruteforce(scores, labels):
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    r = fractional_ranks(np.concatenate([pos, neg]))
    return (r[: len(pos)].sum() - len(pos) * (len(pos) + 1) / 2) / (len(pos) * len(neg))


class TestLoadCsv:
    def test_missing_cell_sets_mask(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("lactate,age,outcome\n1.5,60,0\n,70,1\n2.2,55,0\n")
        cohort = load_csv(p)
        assert cohort.feature_names == ["lactate", "age"]
        assert cohort.mask.sum() == 1
        assert cohort.mask[1, 0]
        assert np.isnan(cohort.x[1, 0])
        np.testing.assert_array_equal(cohort.y, [0, 1, 0])

    def test_invalid_label(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("a,outcome\n1.0,2\n")
        with pytest.raises(InvalidLabel):
            load_csv(p)
        # InvalidLabel is in the MissingLabel family
        assert issubclass(InvalidLabel, MissingLabel)

    def test_empty_label(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("a,outcome\n1.0,\n")
        with pytest.raises(MissingLabel):
            load_csv(p)

    def test_parse_error_location(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("a,b,outcome\n1.0,2.0,0\n1.0,oops,1\n")
        with pytest.raises(ParseError) as err:
            load_csv(p)
        assert err.value.row == 2
        assert err.value.column == 1

    def test_round_trip_full_precision(self, tmp_path):
        rng = SeededRng(3)
        cohort = generate_synthetic_cohort(50, 0.3, missing_rate=0.1, rng=rng)
        p = tmp_path / "rt.csv"
        save_csv(cohort, p)
        loaded = load_csv(p)
        assert loaded.feature_names == cohort.feature_names
        np.testing.assert_array_equal(loaded.mask, cohort.mask)
        np.testing.assert_array_equal(loaded.y, cohort.y)
        np.testing.assert_array_equal(
            loaded.x[~loaded.mask], cohort.x[~cohort.mask]
        )


class TestSyntheticCohort:
    def test_prevalence_hits_target(self):
        cohort = generate_synthetic_cohort(20_000, 0.08, rng=SeededRng(7))
        assert abs(cohort.y.mean() - 0.08) <= 0.01
        assert cohort.feature_names == list(SYNTHETIC_FEATURES)
        assert cohort.n_features == 12

    def test_no_missing_when_rate_zero(self):
        cohort = generate_synthetic_cohort(500, 0.2, missing_rate=0.0, rng=SeededRng(1))
        assert not cohort.mask.any()

    def test_missing_rate_applied(self):
        cohort = generate_synthetic_cohort(5000, 0.2, missing_rate=0.2, rng=SeededRng(1))
        assert abs(cohort.mask.mean() - 0.2) < 0.02

    def test_shift_detfunctionable_by_ks(self):
        base = generate_synthetic_cohort(500, 0.08, rng=SeededRng(11))
        shifted = generate_synthetic_cohort(
            500,
            0.08,
            shift_spec=ShiftSpec(feature_shifts={"lactate": 1.0}),
            rng=SeededRng(12),
        )
        j = SYNTHETIC_FEATURES.index("lactate")
        _, p = ks_2sample(base.x[:, j], shifted.x[:, j])
        assert p < 0.01

    def test_prevalence_override(self):
        shifted = generate_synthetic_cohort(
            20_000, 0.08, shift_spec=ShiftSpec(prevalence=0.5), rng=SeededRng(3)
        )
        assert abs(shifted.y.mean() - 0.5) <= 0.01

    def test_unknown_feature_rejected(self):
        with pytest.raises(InvalidSpec):
            generate_synthetic_cohort(
                100, 0.1, shift_spec=ShiftSpec(feature_shifts={"troponin": 1.0})
            )

    def test_determinism(self):
        a = generate_synthetic_cohort(300, 0.1, missing_rate=0.1, rng=SeededRng(42))
        b = generate_synthetic_cohort(300, 0.1, missing_rate=0.1, rng=SeededRng(42))
        np.testing.assert_array_equal(a.x[~a.mask], b.x[~b.mask])
        np.testing.assert_array_equal(a.y, b.y)
        np.testing.assert_array_equal(a.mask, b.mask)

    def test_bayes_auc_near_090(self):
        cohort, p_true = generate_synthetic_cohort(
            60_000, 0.08, rng=SeededRng(5), return_truth=True
        )
        auc = roc_auc_bruteforce(p_true, cohort.y)
        assert 0.88 <= auc <= 0.92


class TestImputation:
    def test_identity_when_complete(self):
        cohort = generate_synthetic_cohort(100, 0.2, rng=SeededRng(0))
        out = impute_chained(cohort)
        np.testing.assert_array_equal(out.x, cohort.x)
        assert not out.mask.any()

    def test_exact_linear_relation_recovered(self):
        rng = SeededRng(1)
        a = rng.normal(size=400)
        b = 2.0 * a
        mask = np.zeros((400, 2), dtype=bool)
        miss = rng.choice(400, size=40, replace=False)
        mask[miss, 1] = True
        x = np.column_stack([a, b])
        x[mask] = np.nan
        cohort = Cohort(["a", "b"], x, mask, np.zeros(400, dtype=int))
        out = impute_chained(cohort)
        np.testing.assert_allclose(out.x[miss, 1], 2.0 * a[miss], atol=1e-6)
        # observed cells untouched
        np.testing.assert_array_equal(out.x[~mask], np.column_stack([a, b])[~mask])

    def test_deterministic(self):
        cohort = generate_synthetic_cohort(500, 0.2, missing_rate=0.2, rng=SeededRng(8))
        out1 = impute_chained(cohort, rng=SeededRng(1))
        out2 = impute_chained(cohort, rng=SeededRng(2))
        np.testing.assert_array_equal(out1.x, out2.x)

    def test_all_missing_feature(self):
        x = np.array([[1.0, np.nan], [2.0, np.nan], [3.0, np.nan]])
        mask = np.isnan(x)
        cohort = Cohort(["a", "b"], x, mask, np.zeros(3, dtype=int))
        with pytest.raises(AllMissingFeature):
            impute_chained(cohort)

    def test_fit_transform_matches_transform_on_same_data(self):
        cohort = generate_synthetic_cohort(400, 0.2, missing_rate=0.15, rng=SeededRng(4))
        imp = ChainedImputer()
        fitted = imp.fit_transform(cohort)
        replayed = imp.transform(cohort)
        np.testing.assert_allclose(fitted.x, replayed.x, atol=1e-12)


class TestStandardize:
    def test_two_point_feature(self):
        cohort = Cohort(
            ["f"], np.array([[0.0], [2.0]]), np.zeros((2, 1), bool), np.array([0, 1])
        )
        out = standardize_fit(cohort)
        np.testing.assert_allclose(out.x.ravel(), [-1.0, 1.0])

    def test_constant_feature_sentinel(self):
        cohort = Cohort(
            ["f"], np.full((4, 1), 7.0), np.zeros((4, 1), bool), np.array([0, 1, 0, 1])
        )
        out = standardize_fit(cohort)
        np.testing.assert_allclose(out.x, 0.0)
        assert out.standardization.std[0] == 1.0

    def test_apply_uses_stored_stats_only(self):
        train = generate_synthetic_cohort(2000, 0.2, rng=SeededRng(1))
        test = generate_synthetic_cohort(500, 0.2, rng=SeededRng(2))
        train_std = standardize_fit(train)
        test_std = standardize_apply(test, train_std.standardization)
        # held-out means are generally nonzero: no leakage
        assert np.max(np.abs(test_std.x.mean(axis=0))) > 1e-4
        refit = standardize_fit(test)
        assert not np.allclose(refit.standardization.mean, train_std.standardization.mean)
        # fitting split is exactly centered
        assert np.max(np.abs(train_std.x.mean(axis=0))) < 1e-9
        assert np.max(np.abs(train_std.x.std(axis=0) - 1.0)) < 1e-9

    def test_not_fitted(self):
        cohort = generate_synthetic_cohort(10, 0.3, rng=SeededRng(0))
        with pytest.raises(NotFitted):
            standardize_apply(cohort)


class TestSelectFeatures:
    def _cohort(self, x, y, names=None):
        names = names or [f"f{i}" for i in range(x.shape[1])]
        return Cohort(names, x, np.isnan(x), np.asarray(y, dtype=int))

    def test_duplicate_pair_drops_one(self):
        rng = SeededRng(0)
        a = rng.normal(size=200)
        x = np.column_stack([a, a.copy(), rng.normal(size=200)])
        y = (rng.uniform(size=200) < 0.5).astype(int)
        report = select_features(self._cohort(x, y))
        dropped = {d for _, d, _ in report.dropped_by_correlation}
        assert len(dropped) == 1
        assert len(report.selected) == 2

    def test_label_copy_feature_tops_mi(self):
        rng = SeededRng(1)
        n = 5000
        y = (rng.uniform(size=n) < 0.3).astype(int)
        x = np.column_stack([y.astype(float), rng.normal(size=n)])
        report = select_features(self._cohort(x, y))
        assert report.mi_ranking[0][0] == "f0"
        h_y = -(0.3 * np.log(0.3) + 0.7 * np.log(0.7))
        emp = y.mean()
        h_emp = -(emp * np.log(emp) + (1 - emp) * np.log(1 - emp))
        assert report.mi_ranking[0][1] == pytest.approx(h_emp, abs=0.01)
        assert report.mi_ranking[0][1] == pytest.approx(h_y, abs=0.02)

    def test_noise_feature_mi_near_zero(self):
        rng = SeededRng(2)
        n = 20_000
        y = (rng.uniform(size=n) < 0.2).astype(int)
        noise = rng.uniform(size=n)
        mi = mutual_information_nats(noise, y)
        assert mi < 0.01
        # null oracle: shuffled labels give the same order of magnitude
        mi_null = mutual_information_nats(noise, rng.permutation(y))
        assert mi_null < 0.01

    def test_mi_bounds_property(self):
        rng = SeededRng(3)
        n = 2000
        y = (rng.uniform(size=n) < 0.4).astype(int)
        h_y = -(0.4 * np.log(0.4) + 0.6 * np.log(0.6))
        for _ in range(5):
            f = rng.normal(size=n) + y
            mi = mutual_information_nats(f, y)
            assert 0.0 <= mi <= h_y + 0.01

    def test_column_permutation_invariance(self):
        rng = SeededRng(4)
        n = 800
        y = (rng.uniform(size=n) < 0.3).astype(int)
        base = rng.normal(size=(n, 5))
        base[:, 3] = base[:, 0] * 0.999 + rng.normal(size=n) * 0.01  # r > 0.9 pair
        base[:, 1] += y
        # distinct missingness so the tie-break is index-independent
        mask = np.zeros((n, 5), dtype=bool)
        mask[: 40, 0] = True
        mask[: 10, 3] = True
        x = base.copy()
        x[mask] = np.nan
        names = [f"f{i}" for i in range(5)]
        rep1 = select_features(Cohort(names, x, mask, y), top_k=3)
        perm = [4, 2, 0, 1, 3]
        rep2 = select_features(
            Cohort([names[i] for i in perm], x[:, perm], mask[:, perm], y), top_k=3
        )
        assert set(rep1.selected) == set(rep2.selected)

    def test_pipeline_order(self):
        # a feature that is both highly correlated with another AND very
        # missing is dropped by the correlation stage first
        rng = SeededRng(5)
        n = 400
        y = (rng.uniform(size=n) < 0.5).astype(int)
        a = rng.normal(size=n)
        b = a.copy()
        mask = np.zeros((n, 2), dtype=bool)
        mask[: int(0.6 * n), 1] = True
        x = np.column_stack([a, b])
        x[mask] = np.nan
        report = select_features(Cohort(["a", "b"], x, mask, y))
        assert [d for _, d, _ in report.dropped_by_correlation] == ["b"]
        assert report.dropped_by_missingness == []


class TestRebalance:
    def _imbalanced(self, n_neg=920, n_pos=80, seed=0):
        rng = SeededRng(seed)
        x = rng.normal(size=(n_neg + n_pos, 3))
        y = np.array([0] * n_neg + [1] * n_pos)
        return Cohort(["a", "b", "c"], x, np.zeros_like(x, dtype=bool), y)

    def test_pos_weight(self):
        assert rebalance(self._imbalanced(), "pos_weight") == pytest.approx(11.5)

    def test_undersample(self):
        out = rebalance(self._imbalanced(), "undersample", SeededRng(1))
        assert (out.y == 1).sum() == 80
        assert (out.y == 0).sum() == 80

    def test_smote_on_segment(self):
        x = np.array([[0.0, 0.0], [1.0, 1.0]] + [[5.0, -3.0]] * 8)
        y = np.array([1, 1] + [0] * 8)
        cohort = Cohort(["a", "b"], x, np.zeros_like(x, dtype=bool), y)
        out = rebalance(cohort, "smote", SeededRng(2), k=1)
        assert (out.y == 1).sum() == 8
        synth = out.x[(out.y == 1)][2:]
        # all synthetics on the segment between the two minority points
        for s in synth:
            assert s[0] == pytest.approx(s[1], abs=1e-12)
            assert -1e-12 <= s[0] <= 1.0 + 1e-12

    def test_smote_convex_hull_property(self):
        cohort = self._imbalanced(n_neg=300, n_pos=40, seed=3)
        out = rebalance(cohort, "smote", SeededRng(4), k=5)
        minority = cohort.x[cohort.y == 1]
        lo, hi = minority.min(axis=0), minority.max(axis=0)
        synth = out.x[len(cohort.y):]
        assert np.all(synth >= lo - 1e-12) and np.all(synth <= hi + 1e-12)

    def test_smote_too_few_minority(self):
        cohort = self._imbalanced(n_neg=50, n_pos=3, seed=5)
        with pytest.raises(TooFewMinority):
            rebalance(cohort, "smote", SeededRng(0), k=5)


class TestReportSerialization:
    def test_feature_report_round_trips_as_json(self):
        import json

        rng = SeededRng(60)
        n = 300
        y = (rng.uniform(size=n) < 0.3).astype(int)
        x = np.column_stack([rng.normal(size=n) + y, rng.normal(size=n)])
        report = select_features(
            Cohort(["sig", "noise"], x, np.zeros_like(x, dtype=bool), y)
        )
        doc = json.loads(json.dumps(report.to_dict()))
        assert doc["format"] == "vdpt.feature-report/1"
        assert doc["selected"][0] == "sig"
        assert doc["mi_ranking"][0]["mi_nats"] > doc["mi_ranking"][1]["mi_nats"]
