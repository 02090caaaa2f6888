"""Gaussian kernel density estimation baseline.

The bandwidth matrix is ``factor^2`` times the sample covariance, with the
factor defaulting to Scott's rule ``n^(-1/(d+4))``.  Evaluation is the exact
O(n * M) mixture sum; this baseline exists for correctness comparisons, not
speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Variance floor used when a singular covariance forces the diagonal fallback.
_VAR_FLOOR = 1e-12


def scott_factor(n: int, d: int) -> float:
    """Scott's rule-of-thumb bandwidth factor ``n^(-1/(d+4))``."""
    return float(n) ** (-1.0 / (d + 4))


@dataclass
class KdeModel:
    data: np.ndarray                      # (n, d) training matrix
    factor: float
    bandwidth: np.ndarray                 # H = factor^2 * sample covariance
    diagonal_fallback: bool = False
    _chol: np.ndarray = field(default=None, repr=False)
    _log_norm: float = field(default=0.0, repr=False)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]


def fit_kde(data, factor_override: float | None = None) -> KdeModel:
    """Fit the Gaussian KDE; falls back to a floored diagonal covariance when
    the sample covariance is singular."""
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    n, d = data.shape
    if n < 2:
        raise ValueError("KDE needs at least two training points")
    factor = scott_factor(n, d) if factor_override is None else float(factor_override)
    if factor <= 0:
        raise ValueError("bandwidth factor must be positive")

    cov = np.atleast_2d(np.cov(data, rowvar=False, ddof=1))
    H = factor ** 2 * cov
    fallback = False
    try:
        chol = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        fallback = True
        floored = np.maximum(np.diag(cov), _VAR_FLOOR)
        H = factor ** 2 * np.diag(floored)
        chol = np.diag(factor * np.sqrt(floored))

    log_det = 2.0 * np.log(np.diag(chol)).sum()
    log_norm = -0.5 * (d * math.log(2.0 * math.pi) + log_det)
    return KdeModel(data=data, factor=factor, bandwidth=H,
                    diagonal_fallback=fallback, _chol=chol, _log_norm=log_norm)


def eval_kde(model: KdeModel, x):
    """Mixture density ``mean_i phi_H(x - x_i)`` at each query point."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[1] != model.d:
        raise ValueError(f"expected points of dimension {model.d}")

    chol_inv = np.linalg.inv(model._chol)
    out = np.empty(pts.shape[0])
    # Chunk queries so the (chunk, n, d) difference tensor stays small.
    chunk = max(1, int(4e6 / max(model.n * model.d, 1)))
    for s in range(0, pts.shape[0], chunk):
        block = pts[s:s + chunk]
        z = (block[:, None, :] - model.data[None, :, :]) @ chol_inv.T
        q = np.einsum("mnd,mnd->mn", z, z)
        out[s:s + chunk] = np.exp(model._log_norm - 0.5 * q).mean(axis=1)
    return float(out[0]) if scalar else out
