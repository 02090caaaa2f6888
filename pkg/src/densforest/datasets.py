"""Synthetic benchmark distributions, CSV ingestion, and preprocessing.

Two synthetic families are built in, both products of independent identical
margins on [0, 1]:

* type1 — 0.3 * Uniform(0.7, 1) + 0.7 * Uniform(0, 0.4), piecewise constant
  with a hard zero-density gap on (0.4, 0.7);
* type2 — 0.3 * Beta(11, 20) + 0.7 * Uniform(0.5, 1).

Preprocessing mirrors a common real-data protocol: drop discrete-looking
columns, drop one column of every highly correlated pair, then z-score with
training-subset statistics only.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

TYPE1 = "type1"
TYPE2 = "type2"
FAMILIES = (TYPE1, TYPE2)

# Mixture weight of the first component, shared by both families.
_W_FIRST = 0.3

# log of 1/B(11, 20) for the type2 beta component.
_BETA_A, _BETA_B = 11.0, 20.0
_LOG_BETA_NORM = math.lgamma(_BETA_A + _BETA_B) - math.lgamma(_BETA_A) - math.lgamma(_BETA_B)

#: Published (rows, columns-after-load) shapes of the UCI benchmark tables,
#: used to sanity-check user-supplied files.
UCI_EXPECTED_SHAPES = {
    "parkinsons": (5875, 15),
    "ionosphere": (351, 32),
    "red_wine": (1599, 11),
    "white_wine": (4898, 11),
}


@dataclass(frozen=True)
class SyntheticSpec:
    """A synthetic distribution: family plus dimension."""

    family: str
    d: int

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        if self.d < 1:
            raise ValueError("d must be at least 1")

    def to_dict(self) -> dict:
        return {"family": self.family, "d": self.d}

    @classmethod
    def from_dict(cls, doc: dict) -> "SyntheticSpec":
        return cls(family=doc["family"], d=int(doc["d"]))


def sample_synthetic(spec: SyntheticSpec, n: int, rng) -> np.ndarray:
    """Draw ``n`` rows; every coordinate is an independent margin draw."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(rng)
    first = rng.random((n, spec.d)) < _W_FIRST
    if spec.family == TYPE1:
        a = rng.uniform(0.7, 1.0, size=(n, spec.d))
        b = rng.uniform(0.0, 0.4, size=(n, spec.d))
    else:
        a = rng.beta(_BETA_A, _BETA_B, size=(n, spec.d))
        b = rng.uniform(0.5, 1.0, size=(n, spec.d))
    return np.where(first, a, b)


def _margin_density(family: str, x: np.ndarray) -> np.ndarray:
    if family == TYPE1:
        out = np.zeros_like(x)
        out[(x >= 0.7) & (x <= 1.0)] = _W_FIRST / 0.3
        out[(x >= 0.0) & (x <= 0.4)] = (1.0 - _W_FIRST) / 0.4
        return out
    inside = (x > 0.0) & (x < 1.0)
    beta = np.zeros_like(x)
    xi = x[inside]
    beta[inside] = np.exp(_LOG_BETA_NORM + (_BETA_A - 1) * np.log(xi)
                          + (_BETA_B - 1) * np.log1p(-xi))
    return _W_FIRST * beta + (1.0 - _W_FIRST) * 2.0 * ((x >= 0.5) & (x <= 1.0))


def true_density(spec: SyntheticSpec, x):
    """Exact density at ``x``: product of the independent margin densities."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[1] != spec.d:
        raise ValueError(f"expected points of dimension {spec.d}")
    dens = np.prod(_margin_density(spec.family, pts), axis=1)
    return float(dens[0]) if scalar else dens


@dataclass
class TabularData:
    """A loaded sample matrix with optional column names."""

    data: np.ndarray
    columns: list[str] | None = None

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]


def load_csv(path, header: bool = False, delimiter: str = ",") -> TabularData:
    """Load a numeric CSV; any unparseable or missing cell is a hard error
    naming its row and column."""
    rows = []
    columns = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for i, raw in enumerate(reader):
            if not raw:
                continue
            if header and columns is None:
                columns = [c.strip() for c in raw]
                continue
            if rows and len(raw) != len(rows[-1]):
                raise ValueError(f"row {i}: expected {len(rows[-1])} columns, got {len(raw)}")
            parsed = []
            for j, cell in enumerate(raw):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise ValueError(f"row {i}, column {j}: cannot parse {cell.strip()!r} "
                                     "as a number") from None
            rows.append(parsed)
    if not rows:
        raise ValueError("empty dataset")
    data = np.asarray(rows, dtype=float)
    if columns is not None and len(columns) != data.shape[1]:
        raise ValueError("header width does not match data rows")
    return TabularData(data=data, columns=columns)


def validate_uci_shape(table: TabularData, name: str) -> None:
    """Check a user-supplied UCI table against its published shape."""
    expected = UCI_EXPECTED_SHAPES.get(name)
    if expected is None:
        raise ValueError(f"unknown dataset name {name!r}; known: {sorted(UCI_EXPECTED_SHAPES)}")
    if (table.n, table.d) != expected:
        raise ValueError(f"{name}: expected shape {expected}, got {(table.n, table.d)}")


@dataclass
class PreprocessState:
    """Column selection plus z-scoring statistics fitted on training rows."""

    n_columns: int
    kept: list[int]
    dropped_discrete: list[int]
    dropped_correlated: list[int]
    dropped_zero_std: list[int]
    means: np.ndarray
    stds: np.ndarray
    discrete_threshold: int = 10
    corr_threshold: float = 0.98

    def to_dict(self) -> dict:
        return {
            "n_columns": self.n_columns,
            "kept": self.kept,
            "dropped_discrete": self.dropped_discrete,
            "dropped_correlated": self.dropped_correlated,
            "dropped_zero_std": self.dropped_zero_std,
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "discrete_threshold": self.discrete_threshold,
            "corr_threshold": self.corr_threshold,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PreprocessState":
        return cls(
            n_columns=int(doc["n_columns"]),
            kept=[int(i) for i in doc["kept"]],
            dropped_discrete=[int(i) for i in doc["dropped_discrete"]],
            dropped_correlated=[int(i) for i in doc["dropped_correlated"]],
            dropped_zero_std=[int(i) for i in doc.get("dropped_zero_std", [])],
            means=np.asarray(doc["means"], dtype=float),
            stds=np.asarray(doc["stds"], dtype=float),
            discrete_threshold=int(doc.get("discrete_threshold", 10)),
            corr_threshold=float(doc.get("corr_threshold", 0.98)),
        )

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "PreprocessState":
        return cls.from_dict(json.loads(text))


def fit_preprocess(data, train_rows, discrete_threshold: int = 10,
                   corr_threshold: float = 0.98) -> PreprocessState:
    """Decide column drops and z-scoring statistics from training rows only.

    Columns with at most ``discrete_threshold`` distinct training values are
    dropped as discrete.  Among the survivors, pairs with Pearson
    ``|rho| > corr_threshold`` are scanned in ascending index order and the
    later column of each offending pair is dropped.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise ValueError("data must be a 2-d matrix")
    train = data[np.asarray(train_rows)]
    if train.shape[0] < 2:
        raise ValueError("need at least two training rows")

    d = data.shape[1]
    dropped_discrete = [j for j in range(d)
                        if np.unique(train[:, j]).size <= discrete_threshold]
    remaining = [j for j in range(d) if j not in dropped_discrete]

    dropped_corr: list[int] = []
    if len(remaining) >= 2:
        sub = train[:, remaining]
        with np.errstate(invalid="ignore", divide="ignore"):
            corr = np.corrcoef(sub, rowvar=False)
        alive = set(remaining)
        for a_pos, a in enumerate(remaining):
            if a not in alive:
                continue
            for b_pos, b in enumerate(remaining[a_pos + 1:], start=a_pos + 1):
                if b not in alive:
                    continue
                rho = corr[a_pos, b_pos]
                if np.isfinite(rho) and abs(rho) > corr_threshold:
                    alive.discard(b)
                    dropped_corr.append(b)
        remaining = [j for j in remaining if j in alive]

    dropped_zero = []
    kept = []
    for j in remaining:
        if np.std(train[:, j]) == 0.0:
            warnings.warn(f"column {j} has zero training std and cannot be "
                          "normalized; dropping it")
            dropped_zero.append(j)
        else:
            kept.append(j)

    means = train[:, kept].mean(axis=0)
    stds = train[:, kept].std(axis=0)
    return PreprocessState(
        n_columns=d, kept=kept, dropped_discrete=dropped_discrete,
        dropped_correlated=sorted(dropped_corr), dropped_zero_std=dropped_zero,
        means=means, stds=stds,
        discrete_threshold=discrete_threshold, corr_threshold=corr_threshold,
    )


def apply_preprocess(state: PreprocessState, data) -> np.ndarray:
    """Drop the recorded columns and z-score with the recorded training stats."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[1] != state.n_columns:
        raise ValueError(f"expected {state.n_columns} columns, got "
                         f"{data.shape[1] if data.ndim == 2 else 'a non-matrix'}")
    return (data[:, state.kept] - state.means) / state.stds
