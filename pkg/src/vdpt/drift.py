"""Dataset-shift statistics: per-feature two-sample KS battery with
Bonferroni correction, label-prevalence chi-square, and an optional
confidence-distribution test for the stochastic model.

Conventions: family-wise alpha defaults to 0.01; binary features are
excluded from the KS battery (KS assumes continuity) and are covered by
the chi-square machinery instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import SchemaMismatch, TooFewSamples, ZeroExpected
from .numeric import gaussian_kde

FAMILY_ALPHA = 0.01


def kolmogorov_sf(lam: float) -> float:
    """Survival function of the Kolmogorov distribution.

    Q(lam) = 2 * sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lam^2), truncated once
    terms drop below 1e-10. Clipped to [0, 1].
    """
    if lam <= 0:
        return 1.0
    total = 0.0
    for k in range(1, 1001):
        term = 2.0 * math.exp(-2.0 * k * k * lam * lam)
        total += term if k % 2 == 1 else -term
        if term < 1e-10:
            break
    return min(1.0, max(0.0, total))


def ks_2sample(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov test.

    D is the sup distance between the two ECDFs evaluated at all pooled
    points; the p-value comes from the asymptotic Kolmogorov distribution
    with effective sample size n_a*n_b/(n_a+n_b).
    """
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    na, nb = a.size, b.size
    if na < 5 or nb < 5:
        raise TooFewSamples(f"KS needs >= 5 samples per side, got {na} and {nb}")
    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / na
    cdf_b = np.searchsorted(b, pooled, side="right") / nb
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    n_eff = na * nb / (na + nb)
    p = kolmogorov_sf(math.sqrt(n_eff) * d)
    return d, p


def chi2_sf_1df(chi2: float) -> float:
    """Upper tail of chi-square with 1 degree of freedom.

    Equals the regularized upper incomplete gamma Q(1/2, x/2), which for
    one degree of freedom reduces to erfc(sqrt(x/2)).
    """
    if chi2 <= 0:
        return 1.0
    return math.erfc(math.sqrt(chi2 / 2.0))


def chi2_label_test(
    observed_counts: tuple[int, int], expected_proportions: tuple[float, float]
) -> tuple[float, float]:
    """One-way chi-square of observed (neg, pos) counts against expected
    proportions (q0, q1). Returns (chi2, p)."""
    obs = np.asarray(observed_counts, dtype=np.float64)
    props = np.asarray(expected_proportions, dtype=np.float64)
    total = obs.sum()
    if total < 5:
        raise TooFewSamples(f"chi-square needs >= 5 observations, got {int(total)}")
    if not math.isclose(props.sum(), 1.0, abs_tol=1e-9):
        raise ValueError("expected proportions must sum to 1")
    expected = props * total
    if np.any(expected == 0.0):
        raise ZeroExpected("an expected count is zero")
    chi2 = float(np.sum((obs - expected) ** 2 / expected))
    return chi2, chi2_sf_1df(chi2)


@dataclass
class FeatureDrift:
    name: str
    statistic: float
    p_value: float
    alpha_corrected: float
    flagged: bool
    kind: str  # "ks" or "binary-chi2"
    kde: Optional[dict] = None  # {"grid": [...], "reference": [...], "current": [...]}


@dataclass
class DriftReport:
    features: list[FeatureDrift]
    label_chi2: float
    label_p: float
    label_observed: tuple[float, float]
    label_expected: tuple[float, float]
    label_flagged: bool
    n_reference: int
    n_current: int
    confidence_d: Optional[float] = None
    confidence_p: Optional[float] = None
    confidence_flagged: Optional[bool] = None
    alpha: float = FAMILY_ALPHA

    @property
    def flagged_features(self) -> list[str]:
        return [f.name for f in self.features if f.flagged]

    def to_dict(self) -> dict:
        return {
            "format": "vdpt.drift-report/1",
            "alpha": self.alpha,
            "n_reference": self.n_reference,
            "n_current": self.n_current,
            "features": [
                {
                    "name": f.name,
                    "kind": f.kind,
                    "statistic": f.statistic,
                    "p_value": f.p_value,
                    "alpha_corrected": f.alpha_corrected,
                    "flagged": f.flagged,
                    "kde": f.kde,
                }
                for f in self.features
            ],
            "label": {
                "chi2": self.label_chi2,
                "p_value": self.label_p,
                "observed_proportions": list(self.label_observed),
                "expected_proportions": list(self.label_expected),
                "flagged": self.label_flagged,
            },
            "confidence": (
                None
                if self.confidence_d is None
                else {
                    "statistic": self.confidence_d,
                    "p_value": self.confidence_p,
                    "flagged": self.confidence_flagged,
                }
            ),
        }


def _observed(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return values[~mask]


def _is_binary(values: np.ndarray) -> bool:
    uniq = np.unique(values)
    return uniq.size <= 2 and np.all(np.isin(uniq, (0.0, 1.0)))


def drift_report(
    reference,
    current,
    vdp_model=None,
    variance_cdf=None,
    alpha: float = FAMILY_ALPHA,
    kde_points: int = 128,
) -> DriftReport:
    """Run the full drift battery of one cohort against a reference.

    Continuous features get a two-sample KS test, Bonferroni-corrected at
    family-wise ``alpha``; features that are 0/1 in both cohorts are tested
    with the chi-square machinery on their frequencies. Labels get the
    one-way chi-square against the reference prevalence. When a trained VDP
    model and its training variance CDF are supplied, the confidence-score
    distributions of the two cohorts are also KS-tested. Flagged continuous
    features carry KDE curves for rendering.
    """
    if list(reference.feature_names) != list(current.feature_names):
        raise SchemaMismatch("cohorts have different feature name lists")
    if current.n_rows < 5:
        raise TooFewSamples(f"current cohort has {current.n_rows} rows, need >= 5")

    m = len(reference.feature_names)
    corrected = alpha / m
    features: list[FeatureDrift] = []
    for j, name in enumerate(reference.feature_names):
        ref_vals = _observed(reference.x[:, j], reference.mask[:, j])
        cur_vals = _observed(current.x[:, j], current.mask[:, j])
        if _is_binary(ref_vals) and _is_binary(cur_vals):
            # frequency comparison against the reference rate
            rate = float(np.mean(ref_vals))
            rate = min(max(rate, 1e-12), 1 - 1e-12)
            pos = int(np.sum(cur_vals == 1.0))
            stat, p = chi2_label_test(
                (cur_vals.size - pos, pos), (1.0 - rate, rate)
            )
            kind = "binary-chi2"
        else:
            stat, p = ks_2sample(ref_vals, cur_vals)
            kind = "ks"
        flagged = p < corrected
        kde = None
        if flagged and kind == "ks":
            lo = min(ref_vals.min(), cur_vals.min())
            hi = max(ref_vals.max(), cur_vals.max())
            pad = 0.1 * (hi - lo + 1e-12)
            grid = np.linspace(lo - pad, hi + pad, kde_points)
            kde = {
                "grid": grid.tolist(),
                "reference": gaussian_kde(ref_vals, grid).tolist(),
                "current": gaussian_kde(cur_vals, grid).tolist(),
            }
        features.append(FeatureDrift(name, stat, p, corrected, flagged, kind, kde))

    ref_prev = float(np.mean(reference.y))
    expected = (1.0 - ref_prev, ref_prev)
    pos = int(np.sum(current.y == 1))
    chi2, label_p = chi2_label_test((current.n_rows - pos, pos), expected)
    obs = ((current.n_rows - pos) / current.n_rows, pos / current.n_rows)

    report = DriftReport(
        features=features,
        label_chi2=chi2,
        label_p=label_p,
        label_observed=obs,
        label_expected=expected,
        label_flagged=label_p < alpha,
        n_reference=reference.n_rows,
        n_current=current.n_rows,
        alpha=alpha,
    )

    if vdp_model is not None and variance_cdf is not None:
        from .uncertainty import confidence

        def _confidences(cohort):
            complete = ~cohort.mask.any(axis=1)  # rows with any missing cell skipped
            _, variances = vdp_model.predict_raw(cohort.x[complete])
            return np.array([confidence(variance_cdf, v) for v in variances])

        d, p = ks_2sample(_confidences(reference), _confidences(current))
        report.confidence_d = d
        report.confidence_p = p
        report.confidence_flagged = p < alpha
    return report
