"""Confidence scores from predictive variance.

The raw predictive variance lives on [0, inf), which is hard to read at the
bedside. We fit the empirical CDF of the training set's variance outputs
and report confidence = 1 - CDF(sigma^2): 0 means low certainty, 1 high.

The ECDF is interpolated between order statistics at plotting positions
rank/(n+1) and clamped outside the observed range, so confidence never
saturates to exactly 0/1 strictly inside the observed support.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotTrained


@dataclass
class VarianceCdf:
    """Sorted training-set variance values (ascending)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=np.float64).ravel())
        if v.size < 10:
            raise ValueError(f"need at least 10 variance values, got {v.size}")
        if np.any(v < 0):
            raise ValueError("variance values must be non-negative")
        self.values = v

    @property
    def n(self) -> int:
        return self.values.size


def fit_variance_cdf(vdp_params, cohort) -> VarianceCdf:
    """One predictive variance per training instance, sorted ascending.

    The cohort must be the (imputed, standardized) training split the model
    was fitted from.
    """
    from .vdp import predict_vdp_batch

    if vdp_params is None:
        raise NotTrained("no trained VDP parameters supplied")
    _, variances = predict_vdp_batch(vdp_params, cohort.x)
    return VarianceCdf(variances)


def cdf_value(cdf: VarianceCdf, sigma2: float) -> float:
    """Interpolated ECDF at sigma2 with rank/(n+1) plotting positions."""
    v = cdf.values
    n = cdf.n
    if sigma2 < v[0]:
        return 0.0
    if sigma2 > v[-1]:
        return 1.0
    positions = np.arange(1, n + 1) / (n + 1)
    return float(np.interp(sigma2, v, positions))


def confidence(cdf: VarianceCdf, sigma2: float) -> float:
    """1 - CDF(sigma^2), in [0, 1]; monotone non-increasing in sigma^2."""
    if sigma2 < 0:
        raise ValueError("variance must be non-negative")
    return 1.0 - cdf_value(cdf, sigma2)
