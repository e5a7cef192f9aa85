"""Cohort ingestion and preparation: CSV I/O, a synthetic ICU cohort
generator, chained-equation imputation, standardization, feature selection,
and class-imbalance handling.

A Cohort is a feature matrix plus a missingness mask and binary labels
(1 = mortality). Missing cells hold NaN in ``x`` and True in ``mask``; every
transformation is deterministic given its SeededRng.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Sequence

import numpy as np

from .errors import (
    AllMissingFeature,
    InvalidLabel,
    InvalidSpec,
    MissingLabel,
    NotFitted,
    ParseError,
    TooFewMinority,
)
from .numeric import SeededRng, pearson

LABEL_COLUMN = "outcome"


@dataclass
class StandardizationStats:
    """Per-feature (mean, std) fitted on a training split. Constant
    features carry the std=1 sentinel so they map to zero."""

    mean: np.ndarray
    std: np.ndarray
    feature_names: list[str]

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "feature_names": list(self.feature_names),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StandardizationStats":
        return cls(
            mean=np.asarray(d["mean"], dtype=np.float64),
            std=np.asarray(d["std"], dtype=np.float64),
            feature_names=list(d["feature_names"]),
        )


@dataclass
class Cohort:
    """Feature matrix with names, missingness mask, and binary labels."""

    feature_names: list[str]
    x: np.ndarray  # n x d, float64; NaN where mask is True
    mask: np.ndarray  # n x d, bool; True = missing
    y: np.ndarray  # n, int (0/1)
    standardization: Optional[StandardizationStats] = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.x.shape != self.mask.shape:
            raise ValueError("x and mask must be congruent")
        if self.x.shape[0] != self.y.shape[0]:
            raise ValueError("x and y row counts differ")
        if self.x.shape[1] != len(self.feature_names):
            raise ValueError("feature_names length must match x columns")
        if not np.all(np.isin(self.y, (0, 1))):
            raise InvalidLabel("labels must be 0/1")

    @property
    def n_rows(self) -> int:
        return self.x.shape[0]

    @property
    def n_features(self) -> int:
        return self.x.shape[1]

    def take(self, idx) -> "Cohort":
        """Row subset, preserving standardization stats."""
        idx = np.asarray(idx)
        return Cohort(
            list(self.feature_names),
            self.x[idx].copy(),
            self.mask[idx].copy(),
            self.y[idx].copy(),
            self.standardization,
        )


def load_csv(path, label_column: str = LABEL_COLUMN) -> Cohort:
    """Load a cohort from UTF-8 comma-separated text.

    Header row holds feature names plus the label column; empty fields are
    missing. Raises ParseError with the offending row/column, MissingLabel
    for empty labels, and InvalidLabel for non-binary labels.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", row=0) from None
        if label_column not in header:
            raise ParseError(f"label column {label_column!r} not in header", row=0)
        label_idx = header.index(label_column)
        names = [h for i, h in enumerate(header) if i != label_idx]
        rows, masks, labels = [], [], []
        for r, record in enumerate(reader, start=1):
            if len(record) != len(header):
                raise ParseError(
                    f"row has {len(record)} fields, expected {len(header)}", row=r
                )
            vals, miss = [], []
            for c, cell in enumerate(record):
                cell = cell.strip()
                if c == label_idx:
                    if cell == "":
                        raise MissingLabel("empty label", row=r, column=c)
                    if cell not in ("0", "1"):
                        try:
                            fv = float(cell)
                        except ValueError:
                            raise InvalidLabel(
                                f"label {cell!r} is not 0/1", row=r, column=c
                            ) from None
                        if fv not in (0.0, 1.0):
                            raise InvalidLabel(
                                f"label {cell!r} is not 0/1", row=r, column=c
                            )
                        cell = str(int(fv))
                    labels.append(int(cell))
                    continue
                if cell == "":
                    vals.append(np.nan)
                    miss.append(True)
                else:
                    try:
                        vals.append(float(cell))
                    except ValueError:
                        raise ParseError(
                            f"cell {cell!r} is not numeric", row=r, column=c
                        ) from None
                    miss.append(False)
            rows.append(vals)
            masks.append(miss)
    d = len(names)
    x = np.asarray(rows, dtype=np.float64).reshape(len(rows), d)
    mask = np.asarray(masks, dtype=bool).reshape(len(rows), d)
    return Cohort(names, x, mask, np.asarray(labels, dtype=np.int64))


def save_csv(cohort: Cohort, path, label_column: str = LABEL_COLUMN) -> None:
    """Write a cohort to CSV with full float precision (repr round-trip)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(cohort.feature_names) + [label_column])
        for i in range(cohort.n_rows):
            row = [
                "" if cohort.mask[i, j] else repr(float(cohort.x[i, j]))
                for j in range(cohort.n_features)
            ]
            row.append(str(int(cohort.y[i])))
            writer.writerow(row)


# ---------------------------------------------------------------------------
# Synthetic cohort generator
# ---------------------------------------------------------------------------


def _load_generator_config() -> dict:
    with resources.files("vdpt.config").joinpath("synthetic_cohort.json").open() as fh:
        return json.load(fh)


_GEN_CONFIG = _load_generator_config()

SYNTHETIC_FEATURES = [f["name"] for f in _GEN_CONFIG["features"]]
SIGNAL_FEATURES = ("lactate", "age", "gcs_eyes", "gcs_verbal", "gcs_motor", "albumin")
NOISE_FEATURES = ("mech_vent", "creatinine", "pt_inr", "wbc", "bun", "map")


@dataclass
class ShiftSpec:
    """Distribution-shift instructions for the generator: per-feature mean
    shifts in units of that feature's population std, plus an optional
    prevalence override."""

    feature_shifts: dict[str, float] = field(default_factory=dict)
    prevalence: Optional[float] = None


def _draw_feature(spec: dict, n: int, rng: SeededRng) -> np.ndarray:
    kind = spec["dist"]
    if kind == "normal":
        return rng.normal(spec["mu"], spec["sigma"], size=n)
    if kind == "lognormal":
        return np.exp(rng.normal(spec["mu"], spec["sigma"], size=n))
    if kind == "bernoulli":
        return (rng.uniform(size=n) < spec["p"]).astype(np.float64)
    if kind == "ordinal":
        return rng.choice(
            np.asarray(spec["levels"], dtype=np.float64), size=n, p=spec["probs"]
        )
    raise InvalidSpec(f"unknown distribution {kind!r}")


def true_log_odds(x: np.ndarray, feature_names: Sequence[str]) -> np.ndarray:
    """Ground-truth label log-odds (without intercept) for generated rows.

    Linear in population-standardized lactate, age, GCS sum, and albumin;
    coefficients come from the versioned generator config.
    """
    cfg = _GEN_CONFIG
    idx = {name: i for i, name in enumerate(feature_names)}
    coef = cfg["log_odds_coefficients"]
    pop = {f["name"]: (f["pop_mean"], f["pop_std"]) for f in cfg["features"]}

    def z(name):
        m, s = pop[name]
        return (x[:, idx[name]] - m) / s

    gcs_sum = x[:, idx["gcs_eyes"]] + x[:, idx["gcs_verbal"]] + x[:, idx["gcs_motor"]]
    z_gcs = (gcs_sum - cfg["gcs_sum_pop_mean"]) / cfg["gcs_sum_pop_std"]
    return (
        coef["lactate"] * z("lactate")
        + coef["age"] * z("age")
        + coef["gcs_sum"] * z_gcs
        + coef["albumin"] * z("albumin")
    )


def _solve_intercept(scores: np.ndarray, prevalence: float) -> float:
    """Bisection on b so that mean(sigmoid(b + scores)) == prevalence."""
    lo, hi = -40.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        mean_p = float(np.mean(1.0 / (1.0 + np.exp(-(mid + scores)))))
        if mean_p < prevalence:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13:
            break
    return 0.5 * (lo + hi)


def generate_synthetic_cohort(
    n: int,
    prevalence: float = 0.08,
    shift_spec: Optional[ShiftSpec] = None,
    missing_rate: float = 0.0,
    rng: Optional[SeededRng] = None,
    return_truth: bool = False,
):
    """Draw a synthetic ICU cohort with a documented logistic ground truth.

    Labels are Bernoulli draws from sigmoid(intercept + linear score); the
    intercept is solved by bisection so the expected positive fraction hits
    ``prevalence`` exactly on the drawn sample. ``shift_spec`` moves feature
    means (in population-sigma units) before labels are drawn and may
    override the prevalence, emulating deployment-time cohort drift.
    Missingness is MCAR at ``missing_rate``.
    """
    if not 0.0 < prevalence < 1.0:
        raise InvalidSpec("prevalence must be in (0, 1)")
    if not 0.0 <= missing_rate <= 0.5:
        raise InvalidSpec("missing_rate must be in [0, 0.5]")
    if rng is None:
        rng = SeededRng(0)
    shift_spec = shift_spec or ShiftSpec()
    unknown = set(shift_spec.feature_shifts) - set(SYNTHETIC_FEATURES)
    if unknown:
        raise InvalidSpec(f"unknown features in shift spec: {sorted(unknown)}")
    target_prev = shift_spec.prevalence if shift_spec.prevalence is not None else prevalence
    if not 0.0 < target_prev < 1.0:
        raise InvalidSpec("prevalence override must be in (0, 1)")

    cfg = _GEN_CONFIG
    cols = []
    for spec in cfg["features"]:
        vals = _draw_feature(spec, n, rng)
        shift = shift_spec.feature_shifts.get(spec["name"], 0.0)
        if shift:
            vals = vals + shift * spec["pop_std"]
        cols.append(vals)
    x = np.column_stack(cols)

    scores = true_log_odds(x, SYNTHETIC_FEATURES)
    intercept = _solve_intercept(scores, target_prev)
    p_true = 1.0 / (1.0 + np.exp(-(intercept + scores)))
    y = (rng.uniform(size=n) < p_true).astype(np.int64)

    mask = np.zeros_like(x, dtype=bool)
    if missing_rate > 0:
        mask = rng.uniform(size=x.shape) < missing_rate
        x = x.copy()
        x[mask] = np.nan

    cohort = Cohort(list(SYNTHETIC_FEATURES), x, mask, y)
    if return_truth:
        return cohort, p_true
    return cohort


# ---------------------------------------------------------------------------
# Imputation
# ---------------------------------------------------------------------------


class ChainedImputer:
    """Single-imputation chained equations with OLS regressors.

    Mean-fill initialization, features visited in descending training
    missingness order, a fixed number of rounds. ``fit`` stores the mean
    vector, visit order, and the per-round regression coefficients so that
    ``transform`` replays the exact same imputation map on new data.
    """

    def __init__(self, rounds: int = 10):
        self.rounds = rounds
        self.means_: Optional[np.ndarray] = None
        self.visit_order_: Optional[list[int]] = None
        # coeffs_[round][feature_index] -> array of length d (intercept last)
        self.coeffs_: Optional[list[dict[int, np.ndarray]]] = None

    def fit(self, cohort: Cohort) -> "ChainedImputer":
        x, mask = cohort.x, cohort.mask
        n, d = x.shape
        miss_rate = mask.mean(axis=0)
        if np.any(miss_rate >= 1.0):
            bad = [cohort.feature_names[j] for j in np.where(miss_rate >= 1.0)[0]]
            raise AllMissingFeature(f"features with no observed values: {bad}")
        self.means_ = np.array(
            [x[~mask[:, j], j].mean() if mask[:, j].any() else x[:, j].mean() for j in range(d)]
        )
        filled = np.where(mask, self.means_[None, :], x)
        order = [int(j) for j in np.argsort(-miss_rate, kind="stable") if miss_rate[j] > 0]
        self.visit_order_ = order
        self.coeffs_ = []
        for _ in range(self.rounds):
            round_coeffs: dict[int, np.ndarray] = {}
            for j in order:
                obs = ~mask[:, j]
                others = np.delete(filled, j, axis=1)
                design = np.column_stack([others, np.ones(n)])
                beta, *_ = np.linalg.lstsq(design[obs], x[obs, j], rcond=None)
                round_coeffs[j] = beta
                pred = design[~obs] @ beta
                filled[~obs, j] = pred
            self.coeffs_.append(round_coeffs)
        self._fitted_values = filled
        return self

    def transform(self, cohort: Cohort) -> Cohort:
        if self.means_ is None:
            raise NotFitted("imputer not fitted")
        x, mask = cohort.x, cohort.mask
        n = x.shape[0]
        filled = np.where(mask, self.means_[None, :], x)
        for round_coeffs in self.coeffs_:
            for j in self.visit_order_:
                miss = mask[:, j]
                if not miss.any():
                    continue
                others = np.delete(filled, j, axis=1)
                design = np.column_stack([others, np.ones(n)])
                filled[miss, j] = design[miss] @ round_coeffs[j]
        return Cohort(
            list(cohort.feature_names),
            filled,
            np.zeros_like(mask),
            cohort.y.copy(),
            cohort.standardization,
        )

    def fit_transform(self, cohort: Cohort) -> Cohort:
        self.fit(cohort)
        return Cohort(
            list(cohort.feature_names),
            self._fitted_values.copy(),
            np.zeros_like(cohort.mask),
            cohort.y.copy(),
            cohort.standardization,
        )


def impute_chained(cohort: Cohort, rounds: int = 10, rng: Optional[SeededRng] = None) -> Cohort:
    """Impute all missing cells in place of NaNs; observed cells unchanged.

    The OLS variant is fully deterministic; ``rng`` is accepted for
    interface stability with the stochastic operations and is unused.
    """
    del rng
    if not cohort.mask.any():
        return Cohort(
            list(cohort.feature_names),
            cohort.x.copy(),
            cohort.mask.copy(),
            cohort.y.copy(),
            cohort.standardization,
        )
    return ChainedImputer(rounds=rounds).fit_transform(cohort)


# ---------------------------------------------------------------------------
# Standardization
# ---------------------------------------------------------------------------


def standardize_fit(cohort: Cohort) -> Cohort:
    """Fit per-feature z-scoring on this cohort (training split only) and
    apply it. Constant features get the std=1 sentinel and map to zero."""
    x, mask = cohort.x, cohort.mask
    d = x.shape[1]
    mean = np.empty(d)
    std = np.empty(d)
    for j in range(d):
        vals = x[~mask[:, j], j]
        mean[j] = vals.mean() if vals.size else 0.0
        sj = vals.std(ddof=0) if vals.size else 0.0
        std[j] = sj if sj > 0 else 1.0
    stats = StandardizationStats(mean, std, list(cohort.feature_names))
    return standardize_apply(cohort, stats)


def standardize_apply(cohort: Cohort, stats: Optional[StandardizationStats] = None) -> Cohort:
    """Apply stored standardization stats; never refits."""
    if stats is None:
        stats = cohort.standardization
    if stats is None:
        raise NotFitted("no standardization stats available")
    z = (cohort.x - stats.mean[None, :]) / stats.std[None, :]
    z = np.where(cohort.mask, np.nan, z)
    return Cohort(list(cohort.feature_names), z, cohort.mask.copy(), cohort.y.copy(), stats)


# ---------------------------------------------------------------------------
# Feature selection
# ---------------------------------------------------------------------------


@dataclass
class FeatureReport:
    dropped_by_correlation: list[tuple[str, str, float]]  # (kept, dropped, r)
    dropped_by_missingness: list[tuple[str, float]]
    mi_ranking: list[tuple[str, float]]
    selected: list[str]

    def to_dict(self) -> dict:
        return {
            "format": "vdpt.feature-report/1",
            "dropped_by_correlation": [
                {"kept": k, "dropped": d, "r": r} for k, d, r in self.dropped_by_correlation
            ],
            "dropped_by_missingness": [
                {"name": n, "rate": r} for n, r in self.dropped_by_missingness
            ],
            "mi_ranking": [{"name": n, "mi_nats": v} for n, v in self.mi_ranking],
            "selected": list(self.selected),
        }


def _equal_frequency_bins(values: np.ndarray, bins: int = 10) -> np.ndarray:
    """Bin assignment by deduplicated quantile edges; discrete features with
    few unique values collapse to their natural categories."""
    qs = np.quantile(values, np.linspace(0, 1, bins + 1)[1:-1])
    edges = np.unique(qs)
    return np.searchsorted(edges, values, side="right")


def mutual_information_nats(feature: np.ndarray, labels: np.ndarray, bins: int = 10) -> float:
    """Plug-in MI between a binned feature and binary labels, in nats."""
    b = _equal_frequency_bins(feature, bins)
    mi = 0.0
    n = feature.size
    for bv in np.unique(b):
        sel = b == bv
        pb = sel.mean()
        for yv in (0, 1):
            pj = np.mean(sel & (labels == yv))
            if pj == 0:
                continue
            py = np.mean(labels == yv)
            mi += pj * math.log(pj / (pb * py))
    return max(0.0, mi)


def select_features(
    cohort: Cohort,
    corr_threshold: float = 0.9,
    missing_threshold: float = 0.5,
    top_k: int = 20,
) -> FeatureReport:
    """Three-stage filter: correlation prune, missingness filter, MI top-k.

    Correlations use pairwise-complete observations. For each pair with
    |r| > threshold the feature with higher missingness is dropped, ties
    broken by higher column index. MI is computed between each surviving
    feature and the label on complete cells.
    """
    x, mask, y = cohort.x, cohort.mask, cohort.y
    names = cohort.feature_names
    d = x.shape[1]
    miss_rate = mask.mean(axis=0)

    alive = np.ones(d, dtype=bool)
    dropped_corr: list[tuple[str, str, float]] = []
    pairs = []
    for i in range(d):
        for j in range(i + 1, d):
            both = ~mask[:, i] & ~mask[:, j]
            if both.sum() < 3:
                continue
            xi, xj = x[both, i], x[both, j]
            if np.ptp(xi) == 0 or np.ptp(xj) == 0:
                continue
            r = pearson(xi, xj)
            if abs(r) > corr_threshold:
                pairs.append((abs(r), i, j, r))
    for _, i, j, r in sorted(pairs, key=lambda t: (-t[0], t[1], t[2])):
        if not (alive[i] and alive[j]):
            continue
        # drop higher missingness, then higher column index
        drop = j if (miss_rate[j], j) >= (miss_rate[i], i) else i
        keep = i if drop == j else j
        alive[drop] = False
        dropped_corr.append((names[keep], names[drop], r))

    dropped_miss: list[tuple[str, float]] = []
    for j in range(d):
        if alive[j] and miss_rate[j] > missing_threshold:
            alive[j] = False
            dropped_miss.append((names[j], float(miss_rate[j])))

    ranking: list[tuple[str, float]] = []
    for j in range(d):
        if not alive[j]:
            continue
        obs = ~mask[:, j]
        mi = mutual_information_nats(x[obs, j], y[obs]) if obs.any() else 0.0
        ranking.append((names[j], mi))
    ranking.sort(key=lambda t: (-t[1], t[0]))
    selected = [n for n, _ in ranking[:top_k]]
    return FeatureReport(dropped_corr, dropped_miss, ranking, selected)


# ---------------------------------------------------------------------------
# Class imbalance
# ---------------------------------------------------------------------------


def rebalance(cohort: Cohort, strategy: str, rng: Optional[SeededRng] = None, k: int = 5):
    """Handle class imbalance.

    - ``undersample``: drop majority rows uniformly at random to equalize.
    - ``smote``: synthesize minority rows by convex interpolation toward a
      random one of the k nearest minority neighbours (Euclidean distance on
      internally z-scored features) until balanced. Requires complete data.
    - ``pos_weight``: no resampling; returns #negative / #positive.
    """
    pos = np.where(cohort.y == 1)[0]
    neg = np.where(cohort.y == 0)[0]
    if pos.size == 0 or neg.size == 0:
        raise ValueError("both classes must be present")
    if strategy == "pos_weight":
        return neg.size / pos.size
    if rng is None:
        rng = SeededRng(0)
    if strategy == "undersample":
        minority, majority = (pos, neg) if pos.size <= neg.size else (neg, pos)
        kept = rng.choice(majority, size=minority.size, replace=False)
        idx = np.sort(np.concatenate([minority, kept]))
        return cohort.take(idx)
    if strategy == "smote":
        if cohort.mask.any():
            raise ValueError("SMOTE requires an imputed cohort")
        minority, majority = (pos, neg) if pos.size <= neg.size else (neg, pos)
        if minority.size <= k:
            raise TooFewMinority(
                f"SMOTE with k={k} needs more than {k} minority rows, got {minority.size}"
            )
        need = majority.size - minority.size
        xm = cohort.x[minority]
        mu = xm.mean(axis=0)
        sd = xm.std(axis=0, ddof=0)
        sd[sd == 0] = 1.0
        zm = (xm - mu) / sd
        d2 = ((zm[:, None, :] - zm[None, :, :]) ** 2).sum(axis=2)
        np.fill_diagonal(d2, np.inf)
        nn = np.argsort(d2, axis=1)[:, :k]
        base = rng.integers(0, minority.size, size=need)
        pick = rng.integers(0, k, size=need)
        u = rng.uniform(size=need)[:, None]
        neighbors = nn[base, pick]
        synth = xm[base] + u * (xm[neighbors] - xm[base])
        minority_label = int(cohort.y[minority[0]])
        x_new = np.vstack([cohort.x, synth])
        y_new = np.concatenate([cohort.y, np.full(need, minority_label, dtype=np.int64)])
        mask_new = np.vstack([cohort.mask, np.zeros_like(synth, dtype=bool)])
        return Cohort(list(cohort.feature_names), x_new, mask_new, y_new, cohort.standardization)
    raise ValueError(f"unknown strategy {strategy!r}")
