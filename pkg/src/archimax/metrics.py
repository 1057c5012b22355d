"""Evaluation metrics: copula CvM distance, stdf IRAE, lambda fingerprint.

The lambda map phi'(phi^{-1}(w)) * phi^{-1}(w) is scale invariant, which
makes it the right way to compare generators whose free scale is not
identified. Its independence-copula asymptotic variance provides an
approximate confidence band.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import _as_matrix, _ecdf_multivariate
from .errors import InvalidInputError
from .util import as_rng, uniform_simplex


def cvm(samples_a, samples_b, mc: int = 10_000, seed=0) -> float:
    """Monte Carlo L2 distance between two empirical copulas.

    Mean over `mc` uniform points of (C_a(u) - C_b(u))^2, with common
    integration points, so the value is symmetric per seed.
    """
    a = _as_matrix(samples_a)
    b = _as_matrix(samples_b)
    if a.shape[1] != b.shape[1]:
        raise InvalidInputError("samples must share a dimension")
    rng = as_rng(seed)
    queries = rng.random(size=(mc, a.shape[1]))
    return float(np.mean((_ecdf_multivariate(a, queries)
                          - _ecdf_multivariate(b, queries)) ** 2))


def irae(l_true, l_est, d: int, mc: int = 10_000, seed=0) -> float:
    """Integrated relative absolute error between two stdf evaluators.

    Mean over uniform simplex points of |l_true - l_est| / l_true; points
    where the reference vanishes are excluded (possible only at corners).
    """
    rng = as_rng(seed)
    points = uniform_simplex(mc, d, rng)
    ref = np.asarray(l_true(points), dtype=float)
    est = np.asarray(l_est(points), dtype=float)
    keep = ref > 0
    if not keep.any():
        raise InvalidInputError("reference stdf vanished at every point")
    return float(np.mean(np.abs(ref[keep] - est[keep]) / ref[keep]))


@dataclass
class LambdaCurve:
    """Generator fingerprint on a grid, optionally with a variance band."""

    grid: np.ndarray
    values: np.ndarray
    band: np.ndarray | None = None

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if np.any(self.grid <= 0) or np.any(self.grid >= 1):
            raise InvalidInputError("lambda grid must lie strictly inside (0, 1)")
        if np.any(np.diff(self.grid) <= 0):
            raise InvalidInputError("lambda grid must be strictly increasing")
        if self.band is not None:
            self.band = np.asarray(self.band, dtype=float)


def default_lambda_grid(points: int = 99) -> np.ndarray:
    return np.linspace(0.01, 0.99, points)


def lambda_map(phi, phi_deriv, phi_inverse, grid=None,
               n: int | None = None) -> LambdaCurve:
    """lambda(w) = phi'(phi^{-1}(w)) * phi^{-1}(w) on a grid in (0, 1).

    When `n` is given the curve carries the approximate asymptotic
    variance band of the independence copula at that sample size.
    """
    if grid is None:
        grid = default_lambda_grid()
    grid = np.asarray(grid, dtype=float)
    inv = np.asarray(phi_inverse(grid), dtype=float)
    vals = np.asarray(phi_deriv(inv), dtype=float) * inv
    band = lambda_variance(grid, n) if n is not None else None
    return LambdaCurve(grid=grid, values=vals, band=band)


def lambda_variance(x, n: int):
    """Asymptotic variance x(x - log x - 1)/n of the independence copula."""
    if n < 1:
        raise InvalidInputError("sample count must be >= 1")
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0) or np.any(x > 1):
        raise InvalidInputError("variance is defined on (0, 1]")
    out = x * (x - np.log(x) - 1.0) / n
    return float(out) if out.ndim == 0 else out


def lambda_mse(curve_est: LambdaCurve, curve_true: LambdaCurve) -> float:
    """Mean squared difference of two lambda curves on a shared grid."""
    if curve_est.grid.shape != curve_true.grid.shape or \
            not np.allclose(curve_est.grid, curve_true.grid):
        raise InvalidInputError("lambda curves must share a grid")
    return float(np.mean((curve_est.values - curve_true.values) ** 2))
