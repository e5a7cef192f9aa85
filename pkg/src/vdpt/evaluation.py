"""Metrics, stratified cross-validation, and seeded random hyperparameter
search optimizing the positive likelihood ratio.

ROC AUC uses the rank-based Mann-Whitney formulation (ties count 1/2);
PRC AUC uses step-wise interpolation (the conservative convention);
LR+ = sensitivity / (1 - specificity) with an infinity sentinel when
specificity is 1 and sensitivity positive. Cross-validation fits the whole
preprocessing pipeline (impute, standardize, rebalance) inside each
training fold, so there is no leakage by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np
import scipy.special

from .data import ChainedImputer, Cohort, standardize_apply, standardize_fit
from .errors import SingleClass, TooFewPerClass
from .numeric import SeededRng, fractional_ranks


@dataclass
class MetricSet:
    precision: float
    sensitivity: float
    specificity: float
    roc_auc: float
    prc_auc: float
    balanced_accuracy: float
    lr_plus: float
    accuracy: float
    threshold: float = 0.5

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lr_plus"] = "inf" if math.isinf(d["lr_plus"]) else d["lr_plus"]
        return d


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Mann-Whitney AUC with average ranks, so ties count as 1/2."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    n_pos = int(np.sum(labels == 1))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("ROC AUC needs both classes")
    ranks = fractional_ranks(scores)
    rank_sum = float(np.sum(ranks[labels == 1]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def prc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Step interpolation: sum of precision * recall-increment over
    descending score thresholds (ties grouped)."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    n_pos = int(np.sum(labels == 1))
    if n_pos == 0 or n_pos == labels.size:
        raise SingleClass("PRC AUC needs both classes")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    auc = 0.0
    tp = fp = 0
    prev_recall = 0.0
    i = 0
    n = labels.size
    while i < n:
        j = i
        while j + 1 < n and s[j + 1] == s[i]:
            j += 1
        tp += int(np.sum(y[i : j + 1] == 1))
        fp += (j - i + 1) - int(np.sum(y[i : j + 1] == 1))
        recall = tp / n_pos
        precision = tp / (tp + fp)
        auc += (recall - prev_recall) * precision
        prev_recall = recall
        i = j + 1
    return auc


def metrics(scores, labels, threshold: float = 0.5) -> MetricSet:
    """Full metric panel at a decision threshold. AUCs raise SingleClass if
    only one class is present; the thresholded rates are still defined."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    pred = scores >= threshold
    tp = int(np.sum(pred & (labels == 1)))
    tn = int(np.sum(~pred & (labels == 0)))
    fp = int(np.sum(pred & (labels == 0)))
    fn = int(np.sum(~pred & (labels == 1)))
    n_pos, n_neg = tp + fn, tn + fp
    sens = tp / n_pos if n_pos else 0.0
    spec = tn / n_neg if n_neg else 0.0
    prec = tp / (tp + fp) if (tp + fp) else 0.0
    acc = (tp + tn) / labels.size if labels.size else 0.0
    if spec == 1.0:
        lr = math.inf if sens > 0 else 0.0
    else:
        lr = sens / (1.0 - spec)
    return MetricSet(
        precision=prec,
        sensitivity=sens,
        specificity=spec,
        roc_auc=roc_auc(scores, labels),
        prc_auc=prc_auc(scores, labels),
        balanced_accuracy=(sens + spec) / 2.0,
        lr_plus=lr,
        accuracy=acc,
        threshold=threshold,
    )


def stratified_kfold(cohort: Cohort, k: int = 10, seed: int = 0) -> list[np.ndarray]:
    """Disjoint fold index sets with per-fold positive fraction within one
    instance of the global fraction."""
    y = cohort.y
    folds: list[list[int]] = [[] for _ in range(k)]
    rng = SeededRng(seed)
    for cls in (0, 1):
        idx = np.where(y == cls)[0]
        if idx.size < k:
            raise TooFewPerClass(f"class {cls} has {idx.size} rows, need >= {k}")
        idx = rng.permutation(idx)
        for pos, i in enumerate(idx):
            folds[pos % k].append(int(i))
    return [np.sort(np.array(f)) for f in folds]


def _fit_and_score(model_kind: str, train: Cohort, test: Cohort, config) -> MetricSet:
    """Impute/standardize fit on the training fold only, then train and
    score on the held-out fold."""
    if train.mask.any():
        imputer = ChainedImputer()
        train = imputer.fit_transform(train)
        test = imputer.transform(test)
    elif test.mask.any():
        imputer = ChainedImputer().fit(train)
        test = imputer.transform(test)
    train = standardize_fit(train)
    test = standardize_apply(test, train.standardization)
    if model_kind == "mlp":
        from .mlp import predict_proba, train as train_mlp

        params, _ = train_mlp(train, config)
        scores = predict_proba(params, test.x)
    elif model_kind == "vdp":
        from .vdp import predict_vdp_batch, train_vdp

        params, _ = train_vdp(train, config)
        scores, _ = predict_vdp_batch(params, test.x)
    else:
        raise ValueError(f"unknown model kind {model_kind!r}")
    return metrics(scores, test.y)


@dataclass
class CvResult:
    per_fold: list[MetricSet]
    mean: dict[str, float]
    stderr: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "format": "vdpt.cv-result/1",
            "per_fold": [m.to_dict() for m in self.per_fold],
            "mean": self.mean,
            "stderr": self.stderr,
        }


_METRIC_FIELDS = (
    "precision",
    "sensitivity",
    "specificity",
    "roc_auc",
    "prc_auc",
    "balanced_accuracy",
    "lr_plus",
    "accuracy",
)


def _aggregate(per_fold: list[MetricSet]) -> CvResult:
    mean, stderr = {}, {}
    for name in _METRIC_FIELDS:
        vals = np.array([getattr(m, name) for m in per_fold], dtype=np.float64)
        finite = vals[np.isfinite(vals)]
        if finite.size == 0:
            mean[name] = math.inf
            stderr[name] = 0.0
            continue
        mean[name] = float(finite.mean())
        stderr[name] = float(finite.std(ddof=1) / np.sqrt(finite.size)) if finite.size > 1 else 0.0
    return CvResult(per_fold, mean, stderr)


def cross_validate(model_kind: str, cohort: Cohort, config, k: int = 10,
                   seed: int = 0) -> CvResult:
    """k-fold stratified CV; the preprocessing pipeline is fit inside each
    training fold only."""
    folds = stratified_kfold(cohort, k, seed)
    all_idx = np.arange(cohort.n_rows)
    per_fold = []
    for fold in folds:
        test_mask = np.zeros(cohort.n_rows, dtype=bool)
        test_mask[fold] = True
        per_fold.append(
            _fit_and_score(
                model_kind, cohort.take(all_idx[~test_mask]), cohort.take(fold), config
            )
        )
    return _aggregate(per_fold)


def paired_t_test(a, b) -> tuple[float, float]:
    """Two-sided paired t-test on per-fold metrics. Returns (t, p)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    d = a - b
    n = d.size
    sd = d.std(ddof=1)
    if sd == 0.0:
        if d.mean() == 0.0:
            return 0.0, 1.0
        return math.copysign(math.inf, d.mean()), 0.0
    t = float(d.mean() / (sd / math.sqrt(n)))
    p = 2.0 * float(scipy.special.stdtr(n - 1, -abs(t)))
    return t, p


# ---------------------------------------------------------------------------
# Random hyperparameter search
# ---------------------------------------------------------------------------


@dataclass
class SearchSpace:
    """Uniform ranges (log-uniform for the learning rate and weight decay).
    Hidden widths are sampled per layer from [width_low, width_high]."""

    width_low: int = 16
    width_high: int = 256
    n_hidden: int = 3
    lr_low: float = 1e-4
    lr_high: float = 0.1
    decay_low: float = 1e-4
    decay_high: float = 0.05
    momentum_low: float = 0.0
    momentum_high: float = 0.95
    epochs_low: int = 10
    epochs_high: int = 150
    batch_choices: tuple[int, ...] = (0, 250, 500, 1000)
    imbalance_choices: tuple[str, ...] = ("pos_weight", "undersample", "smote")

    def __post_init__(self):
        if self.width_low > self.width_high or self.lr_low > self.lr_high:
            raise ValueError("empty range in search space")


def _sample_config(model_kind: str, space: SearchSpace, cohort: Cohort, rng: SeededRng):
    widths = tuple(
        int(rng.integers(space.width_low, space.width_high + 1))
        for _ in range(space.n_hidden)
    )
    lr = float(np.exp(rng.uniform(np.log(space.lr_low), np.log(space.lr_high))))
    decay = float(np.exp(rng.uniform(np.log(space.decay_low), np.log(space.decay_high))))
    momentum = float(rng.uniform(space.momentum_low, space.momentum_high))
    epochs = int(rng.integers(space.epochs_low, space.epochs_high + 1))
    batch = int(rng.choice(np.asarray(space.batch_choices)))
    strategies = [
        s for s in space.imbalance_choices
        if not (model_kind == "vdp" and s == "pos_weight")
    ]
    strategy = str(rng.choice(np.asarray(strategies, dtype=object)))
    seed = int(rng.integers(0, 2**31 - 1))
    if model_kind == "mlp":
        from .mlp import TrainConfig

        n_pos = int(np.sum(cohort.y == 1))
        pos_weight = (cohort.n_rows - n_pos) / n_pos if strategy == "pos_weight" else 1.0
        return TrainConfig(
            widths=widths, epochs=epochs, batch_size=batch, learning_rate=lr,
            weight_decay=decay, momentum=momentum, pos_weight=pos_weight, seed=seed,
            rebalance=None if strategy == "pos_weight" else strategy,
        )
    from .vdp import VdpTrainConfig

    return VdpTrainConfig(
        widths=widths, epochs=epochs, batch_size=batch, learning_rate=lr,
        weight_decay=decay, momentum=momentum, seed=seed, rebalance=strategy,
    )


def _rank_key(mean_lr: float, mean_sens: float) -> tuple:
    """Infinite LR+ outranks finite values, but only among configs with
    sensitivity >= 0.5; degenerate near-always-negative classifiers are
    demoted below any config in the healthy-sensitivity tier."""
    healthy = 1 if mean_sens >= 0.5 else 0
    return (healthy, mean_lr)


@dataclass
class SearchEntry:
    config: object
    mean_lr_plus: float
    mean_sensitivity: float
    cv: Optional[CvResult]
    failed: bool = False
    error: str = ""

    def to_dict(self) -> dict:
        cfg = asdict(self.config)
        cfg["widths"] = list(cfg["widths"])
        return {
            "config": cfg,
            "mean_lr_plus": "inf" if math.isinf(self.mean_lr_plus) else self.mean_lr_plus,
            "mean_sensitivity": self.mean_sensitivity,
            "cv": None if self.cv is None else self.cv.to_dict(),
            "failed": self.failed,
            "error": self.error,
        }


def random_search(model_kind: str, cohort: Cohort, space: SearchSpace,
                  budget: int, seed: int = 0, k: int = 10):
    """Sample ``budget`` configs, score each by mean CV LR+, and return
    (best config, leaderboard sorted best first). Failing configs are
    recorded, not fatal. Deterministic given the seed."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    master = SeededRng(seed)
    sample_rng, cv_seed_rng = master.split(2)
    entries: list[SearchEntry] = []
    for _ in range(budget):
        config = _sample_config(model_kind, space, cohort, sample_rng)
        cv_seed = int(cv_seed_rng.integers(0, 2**31 - 1))
        try:
            cv = cross_validate(model_kind, cohort, config, k=k, seed=cv_seed)
            entries.append(
                SearchEntry(config, cv.mean["lr_plus"], cv.mean["sensitivity"], cv)
            )
        except Exception as exc:  # record and continue
            entries.append(SearchEntry(config, -math.inf, 0.0, None, True, str(exc)))
    entries.sort(
        key=lambda e: _rank_key(e.mean_lr_plus, e.mean_sensitivity), reverse=True
    )
    return entries[0].config, entries
