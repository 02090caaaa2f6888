"""Estimation-accuracy metrics and the k-fold test protocol.

``mae`` measures mean absolute deviation from a known truth density;
``anll`` is the average negative log-likelihood with every estimate guarded
by the machine increment above 1, so it stays finite even where the
estimator returns zero.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

#: Additive guard for log-likelihoods: smallest double-precision increment
#: above 1 (~2.22e-16).
EPSILON = float(np.spacing(1.0))


class MetricError(ValueError):
    """A metric could not be computed (bad estimator output, missing truth)."""


def config_fingerprint(config: dict) -> str:
    """Short stable digest of a configuration mapping."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class EvalReport:
    """One metric value plus the configuration that produced it."""

    metric: str                      # "mae" | "anll"
    value: float
    n_test: int
    config: dict = field(default_factory=dict)
    epsilon_used: float | None = None  # anll only
    extras: dict = field(default_factory=dict)

    @property
    def fingerprint(self) -> str:
        return config_fingerprint(self.config)

    def to_dict(self) -> dict:
        doc = {
            "metric": self.metric,
            "value": self.value,
            "n_test": self.n_test,
            "config": self.config,
            "fingerprint": self.fingerprint,
        }
        if self.epsilon_used is not None:
            doc["epsilon_used"] = self.epsilon_used
        doc.update(self.extras)
        return doc

    def to_json_line(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _estimates(estimator, test_points) -> np.ndarray:
    pts = np.asarray(test_points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] < 1:
        raise ValueError("at least one test point is required")
    vals = np.asarray(estimator(pts), dtype=float).reshape(-1)
    if vals.shape[0] != pts.shape[0]:
        raise MetricError("estimator returned a wrong number of values")
    return vals


def mae(estimator, truth, test_points) -> float:
    """Mean absolute error ``mean |estimator(x) - truth(x)|`` over the points."""
    fhat = _estimates(estimator, test_points)
    if not np.isfinite(fhat).all():
        raise MetricError("non-finite density")
    ftrue = _estimates(truth, test_points)
    return float(np.mean(np.abs(fhat - ftrue)))


def anll_values(values) -> float:
    """ANLL of precomputed density values, with the epsilon guard applied.

    The log terms are summed exactly (fsum), so the result depends only on
    the multiset of values, not their order.
    """
    values = np.asarray(values, dtype=float).reshape(-1)
    return -math.fsum(np.log(values + EPSILON)) / values.size


def anll(estimator, test_points) -> float:
    """Average negative log-likelihood ``-mean log(estimator(x) + eps)``."""
    return anll_values(_estimates(estimator, test_points))


@dataclass
class KFoldResult:
    mean: float
    per_fold: list[float]
    fold_of: np.ndarray = field(repr=False)
    models: list | None = field(default=None, repr=False)


def kfold_anll(data, config, folds: int = 10, workers: int = 1,
               preprocess_opts: dict | None = None,
               return_models: bool = False) -> KFoldResult:
    """K-fold test protocol: fit a forest on each fold's complement and score
    the held-out fold's ANLL.

    Every fold reuses ``config`` verbatim (same seed), so fold scores differ
    only through the data.  When ``preprocess_opts`` is given, columns are
    dropped and z-scored per fold using that fold's training rows only; see
    ``datasets.fit_preprocess`` for the accepted keys.
    """
    from .datasets import apply_preprocess, fit_preprocess
    from .forest import eval_forest, fit_forest

    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    n = data.shape[0]
    if folds < 2:
        raise ValueError("folds must be at least 2")
    if n < folds:
        raise ValueError("need at least one sample per fold")

    fold_of = kfold_assignment(n, folds, config.seed)
    per_fold = []
    models = [] if return_models else None
    for f in range(folds):
        val = fold_of == f
        train = data[~val]
        test = data[val]
        if preprocess_opts is not None:
            state = fit_preprocess(train, np.arange(train.shape[0]), **preprocess_opts)
            train = apply_preprocess(state, train)
            test = apply_preprocess(state, test)
        forest = fit_forest(train, config, workers=workers)
        per_fold.append(anll(lambda x: eval_forest(forest, x), test))
        if return_models:
            models.append(forest)
    return KFoldResult(mean=float(np.mean(per_fold)), per_fold=per_fold,
                       fold_of=fold_of, models=models)


def kfold_assignment(n: int, folds: int, seed) -> np.ndarray:
    """Deterministic fold index per row: one shuffle split into near-equal parts."""
    ss = np.random.SeedSequence(seed, spawn_key=(2**32,))
    perm = np.random.default_rng(ss).permutation(n)
    fold_of = np.empty(n, dtype=np.int64)
    for f, idx in enumerate(np.array_split(perm, folds)):
        fold_of[idx] = f
    return fold_of
