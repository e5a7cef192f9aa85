"""Deterministic feed-forward net: ReLU hidden layers, a single sigmoid
logit head, class-weighted binary cross-entropy, and Nesterov-momentum SGD
with weight decay.

The update rule is fixed and documented:

    g' = g + lambda * theta
    v  = mu * v + g'
    theta = theta - gamma * (g' + mu * v)

Training is single-threaded and deterministic given the config seed;
trained parameters are immutable arrays, safe for concurrent inference.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .data import Cohort, StandardizationStats
from .errors import NonFiniteGradient, ShapeMismatch
from .numeric import SeededRng

P_CLAMP = 1e-12


@dataclass
class TrainConfig:
    """Hyperparameters; the shipped default profile is the deployed
    deterministic model's selection (three hidden layers 197/198/112,
    full-batch Nesterov SGD)."""

    widths: tuple[int, ...] = (197, 198, 112)
    epochs: int = 127
    batch_size: int = 0  # 0 = full batch
    learning_rate: float = 0.03104
    weight_decay: float = 0.0104
    momentum: float = 0.4204
    pos_weight: float = 14.80
    seed: int = 0
    rebalance: Optional[str] = None  # None/"undersample"/"smote" before training
    decay_biases: bool = False  # weight decay applies to weights only by default

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight decay must be non-negative")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")


@dataclass
class MlpParams:
    """Per-layer weight matrices (fan_out x fan_in) and bias vectors.

    Hidden activations are ReLU; the last layer emits one logit."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "relu"

    @property
    def widths(self) -> list[int]:
        return [w.shape[0] for w in self.weights[:-1]]

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[1]

    def copy(self) -> "MlpParams":
        return MlpParams(
            [w.copy() for w in self.weights], [b.copy() for b in self.biases], self.activation
        )


def init_params(n_inputs: int, widths, rng: SeededRng) -> MlpParams:
    """Kaiming-uniform fan-in initialization (gain sqrt(2) for ReLU),
    zero biases."""
    dims = [n_inputs, *widths, 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases)


def forward(params: MlpParams, x: np.ndarray, return_hidden: bool = False):
    """Logits for a batch (n x d) or single vector (d,).

    Returns (logits, activations) when ``return_hidden`` is set; the
    activations list starts with the input batch.
    """
    squeeze = x.ndim == 1
    a = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if a.shape[1] != params.n_inputs:
        raise ShapeMismatch(f"expected {params.n_inputs} features, got {a.shape[1]}")
    acts = [a]
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w.T + b
        a = z if i == len(params.weights) - 1 else np.maximum(z, 0.0)
        acts.append(a)
    logits = a[:, 0]
    if squeeze:
        logits = logits[0]
    return (logits, acts) if return_hidden else logits


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def predict_proba(params: MlpParams, x: np.ndarray):
    """Mortality probability: sigmoid of the single output logit."""
    return sigmoid(forward(params, x))


def weighted_bce(probability, y, pos_weight: float = 1.0) -> float:
    """Mean class-weighted binary cross-entropy over the batch.

    Probabilities are clamped to [1e-12, 1 - 1e-12] before the logs.
    """
    p = np.clip(np.atleast_1d(np.asarray(probability, dtype=np.float64)), P_CLAMP, 1 - P_CLAMP)
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    loss = -(pos_weight * y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    return float(loss.mean())


def backprop(params: MlpParams, x: np.ndarray, y: np.ndarray, pos_weight: float = 1.0):
    """Gradients of mean weighted BCE w.r.t. every weight and bias.

    Exact reverse accumulation; dL/dlogit = (w_pos*y + (1-y)) * (p - y_eff)
    where for weighted BCE dL/dz = -w_pos*y*(1-p) + (1-y)*p.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    n = x.shape[0]
    logits, acts = forward(params, x, return_hidden=True)
    p = sigmoid(np.atleast_1d(logits))
    # d(mean loss)/dz for the sigmoid+weighted-BCE head
    dz = (-pos_weight * y * (1.0 - p) + (1.0 - y) * p)[:, None] / n
    grads_w = [None] * len(params.weights)
    grads_b = [None] * len(params.biases)
    delta = dz
    for i in reversed(range(len(params.weights))):
        a_in = acts[i]
        grads_w[i] = delta.T @ a_in
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i]) * (acts[i] > 0)
    return grads_w, grads_b


@dataclass
class SgdState:
    velocity_w: list[np.ndarray]
    velocity_b: list[np.ndarray]

    @classmethod
    def zeros_like(cls, params: MlpParams) -> "SgdState":
        return cls(
            [np.zeros_like(w) for w in params.weights],
            [np.zeros_like(b) for b in params.biases],
        )


def sgd_nesterov_step(
    params: MlpParams,
    grads: tuple[list[np.ndarray], list[np.ndarray]],
    state: SgdState,
    config: TrainConfig,
) -> MlpParams:
    """One Nesterov step, in place on params and state.

    Aborts (NonFiniteGradient) naming the offending layer if any gradient
    entry is not finite; params are left untouched in that case.
    """
    grads_w, grads_b = grads
    for i, (gw, gb) in enumerate(zip(grads_w, grads_b)):
        if not (np.all(np.isfinite(gw)) and np.all(np.isfinite(gb))):
            raise NonFiniteGradient(f"non-finite gradient in layer {i}")
    bias_decay = config.weight_decay if config.decay_biases else 0.0
    for i in range(len(params.weights)):
        for arr, g, v, decay in (
            (params.weights[i], grads_w[i], state.velocity_w[i], config.weight_decay),
            (params.biases[i], grads_b[i], state.velocity_b[i], bias_decay),
        ):
            g_eff = g + decay * arr
            v *= config.momentum
            v += g_eff
            arr -= config.learning_rate * (g_eff + config.momentum * v)
    return params


def train(cohort: Cohort, config: TrainConfig):
    """Train on an imputed, standardized cohort. Returns (params, losses)
    with one mean-loss entry per epoch. Optional resampling happens first
    (seeded); pos_weight comes from the config."""
    from .data import rebalance as rebalance_op

    rng = SeededRng(config.seed)
    fit_cohort = cohort
    if config.rebalance in ("undersample", "smote"):
        fit_cohort = rebalance_op(cohort, config.rebalance, rng)
    x, y = fit_cohort.x, fit_cohort.y.astype(np.float64)
    params = init_params(x.shape[1], config.widths, rng)
    state = SgdState.zeros_like(params)
    n = x.shape[0]
    bs = config.batch_size if config.batch_size and config.batch_size < n else n
    losses = []
    for _ in range(config.epochs):
        order = rng.permutation(n) if bs < n else np.arange(n)
        epoch_losses = []
        for start in range(0, n, bs):
            idx = order[start : start + bs]
            xb, yb = x[idx], y[idx]
            grads = backprop(params, xb, yb, config.pos_weight)
            epoch_losses.append(weighted_bce(predict_proba(params, xb), yb, config.pos_weight))
            sgd_nesterov_step(params, grads, state, config)
        losses.append(float(np.mean(epoch_losses)))
    return params, losses


# ---------------------------------------------------------------------------
# Artifact serialization
# ---------------------------------------------------------------------------

ARTIFACT_FORMAT = "vdpt.mlp-artifact/1"


@dataclass
class MlpModel:
    """Trained deterministic model bundled with its preprocessing stats and
    the config it was trained with."""

    params: MlpParams
    standardization: Optional[StandardizationStats]
    config: TrainConfig
    feature_names: list[str] = field(default_factory=list)

    def standardize_input(self, x_raw: np.ndarray) -> np.ndarray:
        if self.standardization is None:
            return np.atleast_2d(x_raw)
        return (np.atleast_2d(x_raw) - self.standardization.mean) / self.standardization.std

    def predict_raw(self, x_raw: np.ndarray) -> np.ndarray:
        """Probability for raw-unit inputs (standardizes internally)."""
        return predict_proba(self.params, self.standardize_input(x_raw))

    def to_dict(self) -> dict:
        return {
            "format": ARTIFACT_FORMAT,
            "widths": list(self.params.widths),
            "activation": self.params.activation,
            "weights": [w.ravel().tolist() for w in self.params.weights],
            "biases": [b.tolist() for b in self.params.biases],
            "n_inputs": self.params.n_inputs,
            "standardization": None
            if self.standardization is None
            else self.standardization.to_dict(),
            "train_config": {**asdict(self.config), "widths": list(self.config.widths)},
            "feature_names": list(self.feature_names),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpModel":
        if d.get("format") != ARTIFACT_FORMAT:
            raise ValueError(f"unexpected artifact format {d.get('format')!r}")
        dims = [d["n_inputs"], *d["widths"], 1]
        weights = [
            np.asarray(flat, dtype=np.float64).reshape(fan_out, fan_in)
            for flat, fan_in, fan_out in zip(d["weights"], dims[:-1], dims[1:])
        ]
        biases = [np.asarray(b, dtype=np.float64) for b in d["biases"]]
        params = MlpParams(weights, biases, d["activation"])
        cfg = dict(d["train_config"])
        cfg["widths"] = tuple(cfg["widths"])
        std = d.get("standardization")
        return cls(
            params,
            None if std is None else StandardizationStats.from_dict(std),
            TrainConfig(**cfg),
            list(d.get("feature_names", [])),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)

    @classmethod
    def load(cls, path) -> "MlpModel":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))
