"""Variational density propagation network.

Weights are Gaussian with a mean and a per-row isotropic variance
(sigma^2 = exp(rho)); biases carry per-element variances. The first two
moments of every activation are propagated analytically:

- linear layer, deterministic input x:
    mu_z = mu_W x + mu_b,   var_z[m] = sigma2_w[m] * ||x||^2 + sigma2_b[m]
  (rows are uncorrelated, so the covariance stays diagonal)
- linear layer, stochastic input (mu_a, Sigma_a):
    diagonal:  sigma2_v[n] * (tr Sigma_a + ||mu_a||^2)
               + mu_v[n]^T Sigma_a mu_v[n] + sigma2_b[n]
    off-diag:  mu_v[p]^T Sigma_a mu_v[q]
- element-wise ReLU via first-order Taylor:
    mu_a = f(mu_z),  Sigma_a[p,q] = Sigma_z[p,q] f'(mu_z_p) f'(mu_z_q)
  with f'(0) := 0
- softmax head via its Jacobian at the mean:
    mu_yhat = g(mu_t),  Sigma_yhat = J Sigma_t J^T

Training maximizes the ELBO: Gaussian log-likelihood of one-hot targets
with Sigma_yhat + eps*I (the softmax Jacobian is rank-deficient) minus the
closed-form KL to the N(0, I) prior, weighted 1/n_train. Moments are
analytic, so the Monte-Carlo average in the likelihood collapses to a
single evaluation (M = 1).

The backward pass is exact reverse accumulation through all of the above;
it is validated against central finite differences in the test suite.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from typing import Optional, Union

import numpy as np

from .data import Cohort, StandardizationStats
from .errors import NonFiniteGradient, NotPositiveDefinite, ShapeMismatch
from .numeric import SeededRng

RHO_INIT = float(np.log(1e-3))
_CHUNK = 256  # rows per internal chunk; fixed so results are reproducible


@dataclass
class VdpTrainConfig:
    """Hyperparameters; the shipped default profile is the deployed
    stochastic model's selection (hidden widths 31/93/94, mini-batch 1000,
    majority undersampling)."""

    widths: tuple[int, ...] = (31, 93, 94)
    epochs: int = 18
    batch_size: int = 1000
    learning_rate: float = 0.0022
    weight_decay: float = 0.0064
    momentum: float = 0.7589
    mc_samples: int = 1  # analytic moments; only 1 is supported
    jitter: float = 1e-3
    seed: int = 0
    rebalance: Optional[str] = "undersample"
    n_train: int = 0  # KL weight is 1/n_train; 0 = use batch size

    def __post_init__(self):
        if self.jitter <= 0:
            raise ValueError("jitter must be positive")
        if self.mc_samples != 1:
            raise ValueError("analytic propagation supports mc_samples=1 only")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")


@dataclass
class VdpLayerParams:
    mu_w: np.ndarray  # (out, in) weight-row means
    rho_w: np.ndarray  # (out,) per-row log-variance
    mu_b: np.ndarray  # (out,)
    rho_b: np.ndarray  # (out,) per-element bias log-variance

    def copy(self):
        return VdpLayerParams(
            self.mu_w.copy(), self.rho_w.copy(), self.mu_b.copy(), self.rho_b.copy()
        )


@dataclass
class VdpParams:
    layers: list[VdpLayerParams]

    @property
    def widths(self) -> list[int]:
        return [l.mu_w.shape[0] for l in self.layers[:-1]]

    @property
    def n_inputs(self) -> int:
        return self.layers[0].mu_w.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.layers[-1].mu_w.shape[0]

    def copy(self) -> "VdpParams":
        return VdpParams([l.copy() for l in self.layers])


def init_vdp_params(n_inputs: int, widths, n_outputs: int, rng: SeededRng) -> VdpParams:
    """Kaiming-uniform means, log-variances at ln(1e-3), zero bias means."""
    dims = [n_inputs, *widths, n_outputs]
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / fan_in)
        layers.append(
            VdpLayerParams(
                mu_w=rng.uniform(-bound, bound, size=(fan_out, fan_in)),
                rho_w=np.full(fan_out, RHO_INIT),
                mu_b=np.zeros(fan_out),
                rho_b=np.full(fan_out, RHO_INIT),
            )
        )
    return VdpParams(layers)


class MomentVector:
    """Batched activation moments: mean (B, n) and either a per-element
    variance (diagonal storage, used while the covariance is provably
    diagonal) or a full (B, n, n) covariance.

    Covariances are symmetrized on construction; variance entries in
    (-1e-12, 0) from rounding are clamped to zero.
    """

    def __init__(self, mean: np.ndarray, cov: np.ndarray, diag: bool):
        self.mean = np.atleast_2d(np.asarray(mean, dtype=np.float64))
        cov = np.asarray(cov, dtype=np.float64)
        if diag:
            cov = np.atleast_2d(cov)
            self.cov = np.maximum(cov, 0.0)
        else:
            if cov.ndim == 2:
                cov = cov[None, :, :]
            cov = 0.5 * (cov + np.swapaxes(cov, 1, 2))
            n = cov.shape[1]
            idx = np.arange(n)
            d = cov[:, idx, idx]
            cov[:, idx, idx] = np.maximum(d, 0.0)
            self.cov = cov
        self.diag = diag

    @property
    def batch(self) -> int:
        return self.mean.shape[0]

    @property
    def width(self) -> int:
        return self.mean.shape[1]

    def variances(self) -> np.ndarray:
        if self.diag:
            return self.cov
        idx = np.arange(self.width)
        return self.cov[:, idx, idx]

    def dense_cov(self) -> np.ndarray:
        if not self.diag:
            return self.cov
        out = np.zeros((self.batch, self.width, self.width))
        idx = np.arange(self.width)
        out[:, idx, idx] = self.cov
        return out


def _sigma2_w(layer: VdpLayerParams) -> np.ndarray:
    return np.exp(layer.rho_w)


def _sigma2_b(layer: VdpLayerParams) -> np.ndarray:
    return np.exp(layer.rho_b)


def linear_propagate(
    layer: VdpLayerParams, inp: Union[np.ndarray, MomentVector]
) -> MomentVector:
    """Propagate moments through a stochastic affine layer.

    Deterministic input keeps the covariance diagonal (rows uncorrelated);
    stochastic input yields a dense covariance.
    """
    if isinstance(inp, MomentVector):
        if inp.width != layer.mu_w.shape[1]:
            raise ShapeMismatch(
                f"layer expects {layer.mu_w.shape[1]} inputs, got {inp.width}"
            )
        sw = _sigma2_w(layer)
        sb = _sigma2_b(layer)
        mu = inp.mean @ layer.mu_w.T + layer.mu_b
        norm2 = np.sum(inp.mean**2, axis=1)
        if inp.diag:
            tr = np.sum(inp.cov, axis=1)
            # M[b,o,p] = sum_i mu_w[o,i] var[b,i] mu_w[p,i]
            scaled = inp.cov[:, None, :] * layer.mu_w[None, :, :]  # (B,o,i)
            m = np.matmul(scaled, layer.mu_w.T)
        else:
            idx = np.arange(inp.width)
            tr = inp.cov[:, idx, idx].sum(axis=1)
            tmp = np.matmul(inp.cov, layer.mu_w.T)  # (B,i,o)
            m = np.matmul(layer.mu_w[None, :, :], tmp)  # (B,o,o)
        diag_add = sw[None, :] * (tr + norm2)[:, None] + sb[None, :]
        out = layer.mu_w.shape[0]
        oi = np.arange(out)
        m[:, oi, oi] += diag_add
        return MomentVector(mu, m, diag=False)
    x = np.atleast_2d(np.asarray(inp, dtype=np.float64))
    if x.shape[1] != layer.mu_w.shape[1]:
        raise ShapeMismatch(f"layer expects {layer.mu_w.shape[1]} inputs, got {x.shape[1]}")
    mu = x @ layer.mu_w.T + layer.mu_b
    xnorm2 = np.sum(x**2, axis=1)
    var = _sigma2_w(layer)[None, :] * xnorm2[:, None] + _sigma2_b(layer)[None, :]
    return MomentVector(mu, var, diag=True)


def relu_propagate(m: MomentVector) -> MomentVector:
    """First-order Taylor propagation through element-wise ReLU (f'(0)=0)."""
    gate = (m.mean > 0).astype(np.float64)
    mu = m.mean * gate
    if m.diag:
        return MomentVector(mu, m.cov * gate, diag=True)
    cov = m.cov * gate[:, :, None] * gate[:, None, :]
    return MomentVector(mu, cov, diag=False)


def _softmax(t: np.ndarray) -> np.ndarray:
    z = t - t.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _softmax_jacobian(s: np.ndarray) -> np.ndarray:
    j = -s[:, :, None] * s[:, None, :]
    idx = np.arange(s.shape[1])
    j[:, idx, idx] += s
    return j


def softmax_propagate(m: MomentVector) -> MomentVector:
    """Softmax head: mean through g, covariance through the Jacobian at the
    mean. The Jacobian annihilates the ones vector, so output covariance
    rows sum to ~0 and the result is PSD but rank-deficient."""
    s = _softmax(m.mean)
    j = _softmax_jacobian(s)
    cov = np.matmul(np.matmul(j, m.dense_cov()), np.swapaxes(j, 1, 2))
    return MomentVector(s, cov, diag=False)


def forward_moments(params: VdpParams, x: np.ndarray) -> MomentVector:
    """Full-network propagation: input batch to output MomentVector."""
    m: Union[np.ndarray, MomentVector] = np.atleast_2d(np.asarray(x, dtype=np.float64))
    for i, layer in enumerate(params.layers):
        m = linear_propagate(layer, m)
        if i < len(params.layers) - 1:
            m = relu_propagate(m)
    return softmax_propagate(m)


def predict_vdp(params: VdpParams, x: np.ndarray) -> tuple[float, float]:
    """Mortality probability and pre-jitter predictive variance for one
    standardized input vector."""
    p, v = predict_vdp_batch(params, np.atleast_2d(x))
    return float(p[0]), float(v[0])


def predict_vdp_batch(params: VdpParams, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    out = forward_moments(params, x)
    return out.mean[:, 1].copy(), out.cov[:, 1, 1].copy()


# ---------------------------------------------------------------------------
# ELBO and gradients
# ---------------------------------------------------------------------------


def kl_to_standard_normal(params: VdpParams) -> float:
    """Closed-form KL(q || N(0, I)) summed over all weight rows and biases:
    0.5 * (||mu||^2 + dim*sigma^2 - dim - dim*ln sigma^2) per row."""
    total = 0.0
    for layer in params.layers:
        fan_in = layer.mu_w.shape[1]
        sw = np.exp(layer.rho_w)
        total += 0.5 * float(
            np.sum(layer.mu_w**2)
            + fan_in * np.sum(sw)
            - fan_in * layer.rho_w.size
            - fan_in * np.sum(layer.rho_w)
        )
        sb = np.exp(layer.rho_b)
        total += 0.5 * float(
            np.sum(layer.mu_b**2) + np.sum(sb) - layer.rho_b.size - np.sum(layer.rho_b)
        )
    return total


def _kl_gradients(params: VdpParams, scale: float) -> list[VdpLayerParams]:
    grads = []
    for layer in params.layers:
        fan_in = layer.mu_w.shape[1]
        grads.append(
            VdpLayerParams(
                mu_w=scale * layer.mu_w,
                rho_w=scale * 0.5 * fan_in * (np.exp(layer.rho_w) - 1.0),
                mu_b=scale * layer.mu_b,
                rho_b=scale * 0.5 * (np.exp(layer.rho_b) - 1.0),
            )
        )
    return grads


def _one_hot(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y).astype(int).ravel()
    out = np.zeros((y.size, 2))
    out[np.arange(y.size), y] = 1.0
    return out


def _nll_terms(mu_hat, cov_hat, targets, jitter):
    """Per-instance Gaussian NLL with jittered covariance. Returns
    (nll (B,), a_inv (B,l,l), resid (B,l), jitter_used)."""
    l = mu_hat.shape[1]
    eps = jitter
    for _ in range(10):
        a = cov_hat + eps * np.eye(l)[None, :, :]
        sign, logdet = np.linalg.slogdet(a)
        if np.all(sign > 0):
            a_inv = np.linalg.inv(a)
            resid = mu_hat - targets
            quad = np.einsum("bi,bij,bj->b", resid, a_inv, resid)
            if np.all(quad >= 0):
                nll = 0.5 * (logdet + quad + l * np.log(2.0 * np.pi))
                return nll, a_inv, resid, eps
        eps *= 2.0
    raise NotPositiveDefinite(
        f"output covariance not PD after 10 jitter doublings "
        f"(final eps={eps:g}, min slogdet sign={np.min(sign)})"
    )


def elbo(params: VdpParams, x: np.ndarray, y: np.ndarray, config: VdpTrainConfig):
    """Negative ELBO of a batch plus the per-instance output moments.

    Returns (loss, mu_hat (B, 2), cov_hat (B, 2, 2) pre-jitter). The loss
    is mean per-instance NLL + KL / n_train.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    b = x.shape[0]
    targets = _one_hot(y)
    n_train = config.n_train if config.n_train else b
    nll_sum = 0.0
    mus, covs = [], []
    for start in range(0, b, _CHUNK):
        out = forward_moments(params, x[start : start + _CHUNK])
        nll, _, _, _ = _nll_terms(
            out.mean, out.cov, targets[start : start + _CHUNK], config.jitter
        )
        nll_sum += float(np.sum(nll))
        mus.append(out.mean)
        covs.append(out.cov)
    loss = nll_sum / b + kl_to_standard_normal(params) / n_train
    return loss, np.vstack(mus), np.concatenate(covs, axis=0)


def _zero_grads(params: VdpParams) -> list[VdpLayerParams]:
    return [
        VdpLayerParams(
            np.zeros_like(l.mu_w),
            np.zeros_like(l.rho_w),
            np.zeros_like(l.mu_b),
            np.zeros_like(l.rho_b),
        )
        for l in params.layers
    ]


def _accumulate_chunk_gradients(params, x, targets, jitter, grads, weight):
    """Reverse accumulation of d(sum NLL)/d(params) for one chunk, scaled by
    ``weight`` and added into ``grads``. Returns the chunk NLL sum."""
    n_layers = len(params.layers)
    # forward trace
    inputs: list[Union[np.ndarray, MomentVector]] = []  # input to each linear layer
    pre_relu: list[MomentVector] = []
    m: Union[np.ndarray, MomentVector] = x
    for i, layer in enumerate(params.layers):
        inputs.append(m)
        m = linear_propagate(layer, m)
        if i < n_layers - 1:
            pre_relu.append(m)
            m = relu_propagate(m)
    head_in: MomentVector = m
    head_out = softmax_propagate(head_in)
    s = head_out.mean
    j = _softmax_jacobian(s)
    sigma_t = head_in.dense_cov()
    nll, a_inv, resid, _ = _nll_terms(s, head_out.cov, targets, jitter)

    # adjoint of the NLL head: d(sum nll)/d mu_hat and /d cov_hat
    g_mu_hat = np.matmul(a_inv, resid[:, :, None])[:, :, 0]
    air = np.matmul(a_inv, resid[:, :, None])  # (B,l,1)
    g_cov_hat = 0.5 * (a_inv - np.matmul(air, np.swapaxes(air, 1, 2)))

    # softmax head backward
    g_sigma_t = np.matmul(np.matmul(j, g_cov_hat), j)  # J^T G J with J symmetric
    m_mat = np.matmul(np.matmul(sigma_t, j), g_cov_hat)
    idx = np.arange(s.shape[1])
    diag_m = m_mat[:, idx, idx]
    ms = np.matmul(m_mat + np.swapaxes(m_mat, 1, 2), s[:, :, None])[:, :, 0]
    g_mu_t = np.matmul(g_mu_hat[:, None, :], j)[:, 0, :]
    g_mu_t += 2.0 * np.matmul(j, (diag_m - ms)[:, :, None])[:, :, 0]

    g_mean: np.ndarray = g_mu_t
    g_cov: np.ndarray = g_sigma_t  # dense adjoint for the head input
    g_var: Optional[np.ndarray] = None  # diagonal adjoint when applicable

    for i in reversed(range(n_layers)):
        layer = params.layers[i]
        sw = np.exp(layer.rho_w)
        sb = np.exp(layer.rho_b)
        if i < n_layers - 1:
            # undo the ReLU between this layer's output and the next input
            gate = (pre_relu[i].mean > 0).astype(np.float64)
            g_mean = g_mean * gate
            if g_var is not None:
                g_var = g_var * gate
                g_cov = None
            else:
                g_cov = g_cov * gate[:, :, None] * gate[:, None, :]
        inp = inputs[i]
        if isinstance(inp, MomentVector):
            mu_a, diag_in = inp.mean, inp.diag
            if g_cov is None:  # pragma: no cover - head always dense
                raise RuntimeError("dense adjoint expected for stochastic layer")
            g_cov = 0.5 * (g_cov + np.swapaxes(g_cov, 1, 2))
            gdiag = g_cov[:, np.arange(g_cov.shape[1]), np.arange(g_cov.shape[1])]
            tr = (
                np.sum(inp.cov, axis=1)
                if diag_in
                else inp.cov[:, np.arange(inp.width), np.arange(inp.width)].sum(axis=1)
            )
            norm2 = np.sum(mu_a**2, axis=1)
            # parameter gradients
            grads[i].mu_b += weight * g_mean.sum(axis=0)
            grads[i].rho_b += weight * gdiag.sum(axis=0) * sb
            grads[i].rho_w += weight * (gdiag * (tr + norm2)[:, None]).sum(axis=0) * sw
            grads[i].mu_w += weight * (g_mean.T @ mu_a)
            if diag_in:
                t = inp.cov[:, None, :] * layer.mu_w[None, :, :]  # (B,p,i)
                grads[i].mu_w += weight * 2.0 * np.einsum("bop,bpi->oi", g_cov, t)
            else:
                t = np.matmul(inp.cov, layer.mu_w.T)  # (B,i,p)
                grads[i].mu_w += weight * 2.0 * np.matmul(
                    g_cov, np.swapaxes(t, 1, 2)
                ).sum(axis=0)
            # input adjoints
            new_g_mean = g_mean @ layer.mu_w
            new_g_mean += 2.0 * (gdiag @ sw)[:, None] * mu_a
            full = np.matmul(
                layer.mu_w.T[None, :, :], np.matmul(g_cov, layer.mu_w[None, :, :])
            )  # (B,in,in)
            tr_coeff = gdiag @ sw  # (B,)
            if diag_in:
                g_var = full[:, np.arange(inp.width), np.arange(inp.width)] + tr_coeff[:, None]
                g_cov = None
            else:
                ii = np.arange(inp.width)
                full[:, ii, ii] += tr_coeff[:, None]
                g_cov = full
            g_mean = new_g_mean
        else:
            # first layer, deterministic input
            if g_var is None:
                ii = np.arange(g_cov.shape[1])
                g_var = g_cov[:, ii, ii]
            xnorm2 = np.sum(inp**2, axis=1)
            grads[i].mu_w += weight * (g_mean.T @ inp)
            grads[i].mu_b += weight * g_mean.sum(axis=0)
            grads[i].rho_w += weight * (g_var * xnorm2[:, None]).sum(axis=0) * sw
            grads[i].rho_b += weight * g_var.sum(axis=0) * sb
    return float(np.sum(nll))


def nll_gradients(params: VdpParams, x: np.ndarray, y: np.ndarray, jitter: float):
    """Gradients of the mean per-instance Gaussian NLL only (KL excluded;
    it is data-independent). Returns (mean_nll, grads)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    b = x.shape[0]
    targets = _one_hot(y)
    grads = _zero_grads(params)
    nll_sum = 0.0
    for start in range(0, b, _CHUNK):
        nll_sum += _accumulate_chunk_gradients(
            params, x[start : start + _CHUNK], targets[start : start + _CHUNK],
            jitter, grads, 1.0 / b,
        )
    return nll_sum / b, grads


def elbo_gradients(params: VdpParams, x: np.ndarray, y: np.ndarray, config: VdpTrainConfig):
    """Exact gradients of the batch loss (mean NLL + KL/n_train) w.r.t.
    every mu and rho. Returns (loss, grads) with grads shaped like params."""
    b = np.atleast_2d(x).shape[0]
    n_train = config.n_train if config.n_train else b
    mean_nll, grads = nll_gradients(params, x, y, config.jitter)
    kl_grads = _kl_gradients(params, 1.0 / n_train)
    for g, kg in zip(grads, kl_grads):
        g.mu_w += kg.mu_w
        g.rho_w += kg.rho_w
        g.mu_b += kg.mu_b
        g.rho_b += kg.rho_b
    for i, g in enumerate(grads):
        for arr in (g.mu_w, g.rho_w, g.mu_b, g.rho_b):
            if not np.all(np.isfinite(arr)):
                raise NonFiniteGradient(f"non-finite gradient in layer {i}")
    loss = mean_nll + kl_to_standard_normal(params) / n_train
    return loss, grads


def train_vdp(cohort: Cohort, config: VdpTrainConfig):
    """Train on an imputed, standardized cohort. Default imbalance handling
    is majority undersampling (seeded). Returns (params, losses)."""
    from .data import rebalance as rebalance_op

    rng = SeededRng(config.seed)
    fit_cohort = cohort
    if config.rebalance in ("undersample", "smote"):
        fit_cohort = rebalance_op(cohort, config.rebalance, rng)
    x, y = fit_cohort.x, fit_cohort.y
    n = x.shape[0]
    if config.n_train == 0:
        config = VdpTrainConfig(**{**asdict(config), "n_train": n})
    params = init_vdp_params(x.shape[1], config.widths, 2, rng)
    velocity = _zero_grads(params)
    bs = config.batch_size if config.batch_size and config.batch_size < n else n
    losses = []
    for _ in range(config.epochs):
        order = rng.permutation(n) if bs < n else np.arange(n)
        epoch_losses = []
        for start in range(0, n, bs):
            idx = order[start : start + bs]
            loss, grads = elbo_gradients(params, x[idx], y[idx], config)
            epoch_losses.append(loss)
            _nesterov_step(params, grads, velocity, config)
        losses.append(float(np.mean(epoch_losses)))
    return params, losses


def _nesterov_step(params: VdpParams, grads, velocity, config: VdpTrainConfig):
    """Same documented update rule as the deterministic net. Weight decay
    applies to weight-row means only: decaying log-variances would force
    sigma^2 toward 1 (the KL term already regulates them) and decaying bias
    means breaks the bias-optimality identity the influence module relies
    on."""
    for layer, g, v in zip(params.layers, grads, velocity):
        for arr, garr, varr, decay in (
            (layer.mu_w, g.mu_w, v.mu_w, config.weight_decay),
            (layer.mu_b, g.mu_b, v.mu_b, 0.0),
            (layer.rho_w, g.rho_w, v.rho_w, 0.0),
            (layer.rho_b, g.rho_b, v.rho_b, 0.0),
        ):
            g_eff = garr + decay * arr
            varr *= config.momentum
            varr += g_eff
            arr -= config.learning_rate * (g_eff + config.momentum * varr)


# ---------------------------------------------------------------------------
# Artifact serialization
# ---------------------------------------------------------------------------

ARTIFACT_FORMAT = "vdpt.vdp-artifact/1"


@dataclass
class VdpModel:
    """Trained stochastic model with preprocessing stats, the training
    config, and the training-set variance CDF used for confidence scores."""

    params: VdpParams
    standardization: Optional[StandardizationStats]
    config: VdpTrainConfig
    feature_names: list[str] = field(default_factory=list)
    variance_cdf_values: Optional[np.ndarray] = None

    def standardize(self, x_raw: np.ndarray) -> np.ndarray:
        if self.standardization is None:
            return np.atleast_2d(x_raw)
        return (np.atleast_2d(x_raw) - self.standardization.mean) / self.standardization.std

    def predict_raw(self, x_raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(probability, pre-jitter variance) for raw-unit inputs."""
        return predict_vdp_batch(self.params, self.standardize(x_raw))

    def to_dict(self) -> dict:
        return {
            "format": ARTIFACT_FORMAT,
            "widths": list(self.params.widths),
            "n_inputs": self.params.n_inputs,
            "n_outputs": self.params.n_outputs,
            "mu_w": [l.mu_w.ravel().tolist() for l in self.params.layers],
            "rho_w": [l.rho_w.tolist() for l in self.params.layers],
            "mu_b": [l.mu_b.tolist() for l in self.params.layers],
            "rho_b": [l.rho_b.tolist() for l in self.params.layers],
            "jitter": self.config.jitter,
            "standardization": None
            if self.standardization is None
            else self.standardization.to_dict(),
            "train_config": {**asdict(self.config), "widths": list(self.config.widths)},
            "feature_names": list(self.feature_names),
            "variance_cdf": None
            if self.variance_cdf_values is None
            else self.variance_cdf_values.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VdpModel":
        if d.get("format") != ARTIFACT_FORMAT:
            raise ValueError(f"unexpected artifact format {d.get('format')!r}")
        dims = [d["n_inputs"], *d["widths"], d["n_outputs"]]
        layers = []
        for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
            layers.append(
                VdpLayerParams(
                    mu_w=np.asarray(d["mu_w"][i], dtype=np.float64).reshape(fan_out, fan_in),
                    rho_w=np.asarray(d["rho_w"][i], dtype=np.float64),
                    mu_b=np.asarray(d["mu_b"][i], dtype=np.float64),
                    rho_b=np.asarray(d["rho_b"][i], dtype=np.float64),
                )
            )
        cfg = dict(d["train_config"])
        cfg["widths"] = tuple(cfg["widths"])
        std = d.get("standardization")
        cdf = d.get("variance_cdf")
        return cls(
            VdpParams(layers),
            None if std is None else StandardizationStats.from_dict(std),
            VdpTrainConfig(**cfg),
            list(d.get("feature_names", [])),
            None if cdf is None else np.asarray(cdf, dtype=np.float64),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)

    @classmethod
    def load(cls, path) -> "VdpModel":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))
