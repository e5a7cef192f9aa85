"""Dense linear algebra, seeded RNG, and statistical primitives.

Everything here is pure and re-entrant: values are plain float64 numpy
arrays, safe to share across threads once constructed. All stochastic
operations elsewhere in the package draw from a :class:`SeededRng` so that
identical seeds give bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import DegenerateInput, NotPositiveDefinite, ShapeMismatch

SYMMETRY_TOL = 1e-8


class SeededRng:
    """Deterministic, splittable random source.

    Wraps a PCG64 generator built from a ``numpy.random.SeedSequence`` so
    child streams obtained via :meth:`split` are independent and themselves
    reproducible. The same seed always yields the same stream.
    """

    def __init__(self, seed: int | np.random.SeedSequence):
        if isinstance(seed, np.random.SeedSequence):
            self._seq = seed
        else:
            self._seq = np.random.SeedSequence(int(seed))
        self.gen = np.random.Generator(np.random.PCG64(self._seq))

    @property
    def seed_entropy(self):
        return self._seq.entropy

    def split(self, n: int) -> list["SeededRng"]:
        """Spawn ``n`` independent child streams."""
        return [SeededRng(s) for s in self._seq.spawn(n)]

    # Thin pass-throughs for the draws the package actually uses.
    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.gen.normal(loc, scale, size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.gen.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size)

    def permutation(self, x):
        return self.gen.permutation(x)

    def choice(self, a, size=None, replace=True, p=None):
        return self.gen.choice(a, size=size, replace=replace, p=p)

    def __repr__(self):
        return f"SeededRng(entropy={self._seq.entropy}, key={self._seq.spawn_key})"


def cholesky_logdet_solve(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, float]:
    """Solve ``A X = B`` for symmetric positive-definite A via Cholesky.

    Returns ``(X, log|A|)``. A must be symmetric to within ``SYMMETRY_TOL``
    and positive definite (callers add jitter beforehand when needed).

    Raises:
        NotPositiveDefinite: if a Cholesky pivot is non-positive.
        ShapeMismatch / ValueError: on incompatible or asymmetric input.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeMismatch(f"A must be square, got {a.shape}")
    b2 = b.reshape(-1, 1) if b.ndim == 1 else b
    if b2.shape[0] != a.shape[0]:
        raise ShapeMismatch(f"A is {a.shape}, B is {b.shape}")
    if np.max(np.abs(a - a.T)) > SYMMETRY_TOL * max(1.0, np.max(np.abs(a))):
        raise ValueError("A is not symmetric within tolerance")
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - alias on some versions
        raise NotPositiveDefinite(str(exc)) from exc
    x = scipy.linalg.cho_solve(factor, b2)
    logdet = 2.0 * float(np.sum(np.log(np.diag(factor[0]))))
    return (x.ravel() if b.ndim == 1 else x), logdet


@dataclass
class CgResult:
    """Conjugate-gradient outcome: best iterate plus convergence flag."""

    x: np.ndarray
    converged: bool
    iterations: int
    residual_norm: float


def conjugate_gradient(
    apply_a: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 1000,
) -> CgResult:
    """Solve ``A x = b`` for an SPD linear operator given only ``apply_a``.

    Stops when ``||A x - b|| <= tol * ||b||``. On hitting ``max_iter`` the
    best iterate seen is returned with ``converged=False`` (no exception:
    callers inspect the flag).
    """
    b = np.asarray(b, dtype=np.float64).ravel()
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return CgResult(np.zeros_like(b), True, 0, 0.0)
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rs = float(r @ r)
    best_x, best_res = x.copy(), np.sqrt(rs)
    for it in range(1, max_iter + 1):
        ap = apply_a(p)
        denom = float(p @ ap)
        if denom <= 0 or not np.isfinite(denom):
            break  # operator not SPD along p; return best iterate so far
        alpha = rs / denom
        x = x + alpha * p
        r = r - alpha * ap
        rs_new = float(r @ r)
        res = np.sqrt(rs_new)
        if res < best_res:
            best_x, best_res = x.copy(), res
        if res <= tol * bnorm:
            return CgResult(x, True, it, res)
        p = r + (rs_new / rs) * p
        rs = rs_new
    return CgResult(best_x, False, max_iter, best_res)


def _check_pair(x, y, min_len=3):
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ShapeMismatch(f"length mismatch: {x.shape} vs {y.shape}")
    if x.size < min_len:
        raise DegenerateInput(f"need at least {min_len} points, got {x.size}")
    return x, y


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation coefficient, clipped to [-1, 1].

    Raises DegenerateInput when either argument has zero variance.
    """
    x, y = _check_pair(x, y)
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        raise DegenerateInput("zero variance input")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt((xc @ xc) * (yc @ yc))
    if denom == 0.0:
        raise DegenerateInput("zero variance input")
    return float(np.clip((xc @ yc) / denom, -1.0, 1.0))


def fractional_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the average rank of their group."""
    x = np.asarray(x, dtype=np.float64).ravel()
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size, dtype=np.float64)
    sorted_x = x[order]
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rank correlation: Pearson on average-tie fractional ranks."""
    x, y = _check_pair(x, y)
    return pearson(fractional_ranks(x), fractional_ranks(y))


def gaussian_kde(sample: Sequence[float], eval_points: Sequence[float]) -> np.ndarray:
    """Gaussian kernel density estimate with Silverman's bandwidth.

    Bandwidth h = 1.06 * s * n^(-1/5) with s the sample standard deviation
    (ddof=1). Densities are non-negative and integrate to ~1 over a wide
    grid. Used for report rendering only.
    """
    sample = np.asarray(sample, dtype=np.float64).ravel()
    pts = np.asarray(eval_points, dtype=np.float64).ravel()
    if sample.size < 2:
        raise DegenerateInput("KDE needs at least 2 samples")
    if np.ptp(sample) == 0.0:
        raise DegenerateInput("constant sample has zero spread")
    s = float(np.std(sample, ddof=1))
    h = 1.06 * s * sample.size ** (-0.2)
    z = (pts[:, None] - sample[None, :]) / h
    dens = np.exp(-0.5 * z * z).sum(axis=1) / (sample.size * h * np.sqrt(2.0 * np.pi))
    return dens
