"""Instance-level explanations via influence functions.

The chain is: per-instance loss gradients, Hessian-vector products of the
full training objective by central finite differences (first-order
gradients only), damped inverse-Hessian solves with conjugate gradient,
up-weighting influence on a test loss, and the local feature-importance
score obtained by perturbing training inputs feature by feature and
averaging over a seeded training subsample.

Both networks plug in through a small adapter that exposes flattened
parameters and gradients; anything with that interface (e.g. the quadratic
toys in the tests) works.

Sign convention: FI values are stored exactly in the loss-change sense the
perturbation formula evaluates. Mapping sign to class sentiment for display
is the service layer's job, not this module's.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.special

from .errors import EmptySubsample, NotTrained
from .numeric import CgResult, SeededRng, conjugate_gradient, fractional_ranks, pearson


@dataclass
class InfluenceConfig:
    damping: float = 0.01  # delta added to the Hessian operator
    cg_tol: float = 1e-10
    cg_max_iter: int = 1000
    h_theta: float = 1e-4  # HVP finite-difference step
    h_x: float = 1e-3  # input-perturbation step (standardized units)
    subsample: int = 1000  # training rows aggregated in fi_local
    subsample_seed: int = 0

    def __post_init__(self):
        for name in ("damping", "cg_tol", "h_theta", "h_x"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.subsample < 1 or self.cg_max_iter < 1:
            raise ValueError("subsample and cg_max_iter must be >= 1")

    def echo(self) -> dict:
        return {
            "damping": self.damping,
            "cg_tol": self.cg_tol,
            "cg_max_iter": self.cg_max_iter,
            "h_theta": self.h_theta,
            "h_x": self.h_x,
            "subsample": self.subsample,
            "subsample_seed": self.subsample_seed,
        }


@dataclass
class InfluenceReport:
    feature_names: list[str]
    values: np.ndarray  # signed FI per input feature
    model_tag: str
    test_id: str
    config_echo: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "format": "vdpt.influence-report/1",
            "model": self.model_tag,
            "test_id": self.test_id,
            "feature_names": list(self.feature_names),
            "values": self.values.tolist(),
            "config": self.config_echo,
        }


# ---------------------------------------------------------------------------
# Model adapters: a flattened-parameter view of either network
# ---------------------------------------------------------------------------


class MlpAdapter:
    """Flattened-parameter interface to the deterministic net.

    The per-instance loss is the class-weighted BCE; the full training
    objective adds (weight_decay/2)*||theta||^2, matching what the Nesterov
    update rule minimizes.
    """

    tag = "mlp"

    def __init__(self, params, pos_weight: float, weight_decay: float,
                 decay_biases: bool = False):
        from . import mlp as _mlp

        self._mlp = _mlp
        self.params = params
        self.pos_weight = pos_weight
        self.weight_decay = weight_decay
        self.decay_biases = decay_biases

    @classmethod
    def from_model(cls, model) -> "MlpAdapter":
        return cls(model.params, model.config.pos_weight, model.config.weight_decay,
                   model.config.decay_biases)

    def flat_params(self) -> np.ndarray:
        p = self.params
        return np.concatenate(
            [w.ravel() for w in p.weights] + [b.ravel() for b in p.biases]
        )

    def with_flat_params(self, vec: np.ndarray) -> "MlpAdapter":
        p = self.params.copy()
        pos = 0
        for i, w in enumerate(p.weights):
            p.weights[i] = vec[pos : pos + w.size].reshape(w.shape)
            pos += w.size
        for i, b in enumerate(p.biases):
            p.biases[i] = vec[pos : pos + b.size].reshape(b.shape)
            pos += b.size
        return MlpAdapter(p, self.pos_weight, self.weight_decay, self.decay_biases)

    def _decay_mask(self) -> np.ndarray:
        if self.decay_biases:
            return np.ones(self.flat_params().size)
        parts = [np.ones(w.size) for w in self.params.weights]
        parts += [np.zeros(b.size) for b in self.params.biases]
        return np.concatenate(parts)

    def _flatten_grads(self, grads) -> np.ndarray:
        gw, gb = grads
        return np.concatenate([g.ravel() for g in gw] + [g.ravel() for g in gb])

    def per_instance_loss(self, x_row: np.ndarray, y: float) -> float:
        p = self._mlp.predict_proba(self.params, np.atleast_2d(x_row))
        return self._mlp.weighted_bce(p, [y], self.pos_weight)

    def batch_loss_grad(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Gradient of the mean per-instance loss (no regularizer)."""
        return self._flatten_grads(
            self._mlp.backprop(self.params, x, y, self.pos_weight)
        )

    def objective_grad(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.batch_loss_grad(x, y) + self.weight_decay * self._decay_mask() * self.flat_params()


class VdpAdapter:
    """Flattened-parameter interface to the stochastic net.

    The per-instance loss is the Gaussian NLL term of the ELBO (the KL is
    data-independent and excluded from per-instance gradients); the full
    objective adds KL/n_train plus the mean-only weight decay used in
    training.
    """

    tag = "vdp"

    def __init__(self, params, jitter: float, weight_decay: float, n_train: int):
        from . import vdp as _vdp

        self._vdp = _vdp
        self.params = params
        self.jitter = jitter
        self.weight_decay = weight_decay
        self.n_train = n_train

    @classmethod
    def from_model(cls, model, n_train: Optional[int] = None) -> "VdpAdapter":
        return cls(
            model.params,
            model.config.jitter,
            model.config.weight_decay,
            n_train or model.config.n_train or 1,
        )

    def flat_params(self) -> np.ndarray:
        parts = []
        for l in self.params.layers:
            parts += [l.mu_w.ravel(), l.rho_w, l.mu_b, l.rho_b]
        return np.concatenate(parts)

    def _decay_mask(self) -> np.ndarray:
        parts = []
        for l in self.params.layers:
            parts += [
                np.ones(l.mu_w.size),
                np.zeros(l.rho_w.size),
                np.zeros(l.mu_b.size),
                np.zeros(l.rho_b.size),
            ]
        return np.concatenate(parts)

    def with_flat_params(self, vec: np.ndarray) -> "VdpAdapter":
        p = self.params.copy()
        pos = 0
        for l in p.layers:
            for name in ("mu_w", "rho_w", "mu_b", "rho_b"):
                arr = getattr(l, name)
                setattr(l, name, vec[pos : pos + arr.size].reshape(arr.shape))
                pos += arr.size
        return VdpAdapter(p, self.jitter, self.weight_decay, self.n_train)

    def _flatten_grads(self, grads) -> np.ndarray:
        parts = []
        for g in grads:
            parts += [g.mu_w.ravel(), g.rho_w, g.mu_b, g.rho_b]
        return np.concatenate(parts)

    def per_instance_loss(self, x_row: np.ndarray, y: float) -> float:
        out = self._vdp.forward_moments(self.params, np.atleast_2d(x_row))
        target = np.zeros((1, 2))
        target[0, int(y)] = 1.0
        nll, _, _, _ = self._vdp._nll_terms(out.mean, out.cov, target, self.jitter)
        return float(nll[0])

    def batch_loss_grad(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        _, grads = self._vdp.nll_gradients(self.params, x, y, self.jitter)
        return self._flatten_grads(grads)

    def objective_grad(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        g = self.batch_loss_grad(x, y)
        kl = self._flatten_grads(self._vdp._kl_gradients(self.params, 1.0 / self.n_train))
        return g + kl + self.weight_decay * self._decay_mask() * self.flat_params()


def make_adapter(model):
    """Adapter from an MlpModel or VdpModel artifact bundle."""
    from .mlp import MlpModel
    from .vdp import VdpModel

    if isinstance(model, MlpModel):
        return MlpAdapter.from_model(model)
    if isinstance(model, VdpModel):
        return VdpAdapter.from_model(model)
    raise NotTrained(f"cannot build an influence adapter from {type(model).__name__}")


# ---------------------------------------------------------------------------
# Core operations
# ---------------------------------------------------------------------------


def per_instance_grad(adapter, x_row: np.ndarray, y: float) -> np.ndarray:
    """Flat gradient of the per-instance loss at the current parameters."""
    return adapter.batch_loss_grad(np.atleast_2d(x_row), np.atleast_1d(y))


def hvp(adapter, x: np.ndarray, y: np.ndarray, v: np.ndarray,
        h_theta: float = 1e-4) -> np.ndarray:
    """Hessian-vector product of the full training objective by central
    finite differences of the gradient along the normalized direction."""
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        return np.zeros_like(v)
    vhat = v / norm
    theta = adapter.flat_params()
    g_plus = adapter.with_flat_params(theta + h_theta * vhat).objective_grad(x, y)
    g_minus = adapter.with_flat_params(theta - h_theta * vhat).objective_grad(x, y)
    out = (g_plus - g_minus) / (2.0 * h_theta) * norm
    if not np.all(np.isfinite(out)):
        raise ValueError("non-finite HVP")
    return out


@dataclass
class InverseHvpResult:
    x: np.ndarray
    converged: bool
    iterations: int
    residual_norm: float


def inverse_hvp(adapter, x: np.ndarray, y: np.ndarray, b: np.ndarray,
                config: InfluenceConfig) -> InverseHvpResult:
    """CG solve of (H + damping*I) s = b using finite-difference HVPs."""
    res: CgResult = conjugate_gradient(
        lambda v: hvp(adapter, x, y, v, config.h_theta) + config.damping * v,
        b,
        tol=config.cg_tol,
        max_iter=config.cg_max_iter,
    )
    return InverseHvpResult(res.x, res.converged, res.iterations, res.residual_norm)


def influence_up_loss(adapter, z, z_test, training_set, config: InfluenceConfig,
                      s_test: Optional[np.ndarray] = None) -> float:
    """Up-weighting influence of training point z on the test loss:
    -grad(z_test)^T (H + delta I)^{-1} grad(z). ``s_test`` may be supplied
    to reuse one solve across many z."""
    x_tr, y_tr = training_set
    if s_test is None:
        g_test = per_instance_grad(adapter, *z_test)
        s_test = inverse_hvp(adapter, x_tr, y_tr, g_test, config).x
    g_z = per_instance_grad(adapter, *z)
    return float(-(s_test @ g_z))


def fi_local(adapter, z_test, training_set, config: InfluenceConfig,
             feature_names: Optional[list[str]] = None,
             test_id: str = "") -> InfluenceReport:
    """Local feature importance for one test instance.

    s_test is solved once; each feature of the training subsample is then
    perturbed by +-h_x (standardized units) and the change of
    s_test^T grad(z) is averaged over the subsample. The mean commutes with
    the central difference, so the aggregation uses two batch-mean gradient
    evaluations per feature.
    """
    x_tr, y_tr = training_set
    n = x_tr.shape[0]
    if n == 0:
        raise EmptySubsample("training set is empty")
    rng = SeededRng(config.subsample_seed)
    if config.subsample < n:
        idx = np.sort(rng.choice(n, size=config.subsample, replace=False))
    else:
        idx = np.arange(n)
    xs, ys = x_tr[idx], y_tr[idx]

    g_test = per_instance_grad(adapter, *z_test)
    solve = inverse_hvp(adapter, x_tr, y_tr, g_test, config)
    s_test = solve.x

    d = x_tr.shape[1]
    values = np.empty(d)
    h = config.h_x
    for j in range(d):
        x_plus = xs.copy()
        x_plus[:, j] += h
        x_minus = xs.copy()
        x_minus[:, j] -= h
        a_plus = float(s_test @ adapter.batch_loss_grad(x_plus, ys))
        a_minus = float(s_test @ adapter.batch_loss_grad(x_minus, ys))
        values[j] = -(a_plus - a_minus) / (2.0 * h)
    names = feature_names or [f"x{j}" for j in range(d)]
    echo = config.echo()
    echo["cg_converged"] = solve.converged
    echo["cg_iterations"] = solve.iterations
    return InfluenceReport(list(names), values, adapter.tag, test_id, echo)


# ---------------------------------------------------------------------------
# Explanation analysis
# ---------------------------------------------------------------------------


def _corr_p_value(r: float, n: int) -> float:
    """Two-sided p for a Pearson/Spearman coefficient via the t transform."""
    if n < 3:
        return 1.0
    r = min(max(r, -0.999999999999), 0.999999999999)
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return 2.0 * float(scipy.special.stdtr(n - 2, -abs(t)))


@dataclass
class FeatureCorrelation:
    name: str
    abs_pearson: Optional[float]
    abs_spearman: Optional[float]
    p_pearson: Optional[float]  # Bonferroni-corrected
    p_spearman: Optional[float]
    degenerate: bool = False


def validate_explanations(adapter, cohort, n_pairs: int = 500,
                          rng: Optional[SeededRng] = None,
                          config: Optional[InfluenceConfig] = None,
                          reports: Optional[list[InfluenceReport]] = None):
    """Correlate pair-wise feature differences against pair-wise influence
    differences, per feature, over randomly sampled subject pairs without
    duplicates. Returns (list of FeatureCorrelation, n_pairs_used).

    Reports are computed per subject with fi_local against the cohort
    itself unless precomputed ones are passed in. p-values are
    Bonferroni-corrected across features; degenerate features (zero
    variance in either difference) are reported, not fatal.
    """
    if reports is None:
        config = config or InfluenceConfig()
        training = (cohort.x, cohort.y)
        reports = [
            fi_local(adapter, (cohort.x[i], cohort.y[i]), training, config,
                     feature_names=cohort.feature_names, test_id=str(i))
            for i in range(cohort.n_rows)
        ]
    x = cohort.x
    if len(reports) < 2:
        raise ValueError("need at least 2 subjects with reports")
    if rng is None:
        rng = SeededRng(0)
    n = len(reports)
    total_pairs = n * (n - 1) // 2
    capped = min(n_pairs, total_pairs)
    if capped < n_pairs:
        import warnings

        warnings.warn(
            f"requested {n_pairs} pairs but only {total_pairs} unique pairs exist; capping",
            stacklevel=2,
        )
    pair_ids = rng.choice(total_pairs, size=capped, replace=False)
    # unrank the pair index into (i, k), i < k
    pairs = []
    for pid in np.sort(pair_ids):
        i = int((2 * n - 1 - math.sqrt((2 * n - 1) ** 2 - 8 * pid)) // 2)
        offset = pid - (i * (2 * n - i - 1)) // 2
        pairs.append((i, i + 1 + int(offset)))

    fi = np.stack([r.values for r in reports])
    names = reports[0].feature_names
    d = fi.shape[1]
    m = d  # Bonferroni family size
    out = []
    for j in range(d):
        dx = np.array([x[i, j] - x[k, j] for i, k in pairs])
        dfi = np.array([fi[i, j] - fi[k, j] for i, k in pairs])
        if np.ptp(dx) == 0.0 or np.ptp(dfi) == 0.0:
            out.append(FeatureCorrelation(names[j], None, None, None, None, True))
            continue
        r_p = pearson(dx, dfi)
        r_s = pearson(fractional_ranks(dx), fractional_ranks(dfi))
        out.append(
            FeatureCorrelation(
                names[j],
                abs(r_p),
                abs(r_s),
                min(1.0, m * _corr_p_value(r_p, capped)),
                min(1.0, m * _corr_p_value(r_s, capped)),
            )
        )
    return out, capped


def explanation_profile(reports: list[InfluenceReport], top_k: int = 3):
    """Per-feature frequency of appearing in each subject's top-k by |FI|
    plus the mean-sign sentiment score in [-1, 1]."""
    if not reports:
        raise ValueError("need at least one report")
    names = reports[0].feature_names
    fi = np.stack([r.values for r in reports])
    counts = {name: 0 for name in names}
    for row in fi:
        top = np.argsort(-np.abs(row), kind="stable")[:top_k]
        for j in top:
            counts[names[j]] += 1
    sentiment = {name: float(np.mean(np.sign(fi[:, j]))) for j, name in enumerate(names)}
    return counts, sentiment
