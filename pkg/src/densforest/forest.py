"""Density forests built from cross-validation-selected partition candidates.

Each tree draws ``k`` candidate partitions, scores every candidate by its
average validation ANLL over shared folds (re-counting cell weights per
fold on the fixed geometry), keeps the argmin, and refits it on all rows.
The forest predicts with the uniform average of its ``m`` trees.

All randomness fans out from ``ForestConfig.seed``: tree ``i`` owns an
independent sub-stream, split again into candidate / fold-shuffle / Monte
Carlo streams, so results are reproducible and independent of worker
scheduling.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .density_tree import DensityTree, counts_to_densities, eval_tree, fit_tree, integrate_tree
from .evaluation import anll_values
from .partition import (
    AXIS_PARALLEL,
    BoundingBox,
    bounding_box_of,
    adaptive_oblique_partition,
    adaptive_partition,
    purely_random_partition,
)
from .volume import DEFAULT_MC_POINTS, exact_box_volumes, monte_carlo_volumes

PURELY_RANDOM = "purely_random"
ADAPTIVE_AXIS = "adaptive_axis"
ADAPTIVE_OBLIQUE = "adaptive_oblique"
MODES = (PURELY_RANDOM, ADAPTIVE_AXIS, ADAPTIVE_OBLIQUE)


@dataclass(frozen=True)
class ForestConfig:
    """Hyperparameters of a forest fit.

    ``margin`` pads the bounding box by that fraction of each dimension's
    range; leave it at 0 when the support is known (synthetic data).
    """

    m: int = 10                  # trees
    k: int = 5                   # candidate partitions per tree
    p: int = 64                  # splits per partition
    t: int = 30                  # adaptive probe count
    mode: str = ADAPTIVE_AXIS
    cv_folds: int = 10
    mc_points: int = DEFAULT_MC_POINTS   # oblique volumes only
    seed: int = 0
    margin: float = 0.0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.p < 0:
            raise ValueError("p must be nonnegative")
        if self.t < 1:
            raise ValueError("t must be at least 1")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be at least 2")
        if self.mc_points < 1:
            raise ValueError("mc_points must be at least 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.margin < 0:
            raise ValueError("margin must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "ForestConfig":
        return cls(**doc)


@dataclass
class SelectionRecord:
    """Audit trail of one tree's candidate selection."""

    chosen_index: int
    candidate_scores: np.ndarray          # (k,) mean CV ANLL per candidate
    fold_scores: np.ndarray               # (k, cv_folds) per-fold ANLL

    def to_dict(self) -> dict:
        return {
            "chosen_index": self.chosen_index,
            "candidate_scores": self.candidate_scores.tolist(),
            "fold_scores": self.fold_scores.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SelectionRecord":
        return cls(
            chosen_index=int(doc["chosen_index"]),
            candidate_scores=np.asarray(doc["candidate_scores"], dtype=float),
            fold_scores=np.asarray(doc["fold_scores"], dtype=float),
        )


@dataclass
class Forest:
    """``m`` selected density trees plus their selection records."""

    trees: list[DensityTree]
    config: ForestConfig
    selection_records: list[SelectionRecord] = field(default_factory=list)

    @property
    def n_train(self) -> int:
        return self.trees[0].n_train

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "trees": [t.to_dict() for t in self.trees],
            "selection_records": [r.to_dict() for r in self.selection_records],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)

    @classmethod
    def from_dict(cls, doc: dict) -> "Forest":
        return cls(
            trees=[DensityTree.from_dict(t) for t in doc["trees"]],
            config=ForestConfig.from_dict(doc["config"]),
            selection_records=[SelectionRecord.from_dict(r)
                               for r in doc.get("selection_records", [])],
        )

    @classmethod
    def from_json(cls, text: str) -> "Forest":
        return cls.from_dict(json.loads(text))


def _tree_seed_sequences(config: ForestConfig) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(config.seed).spawn(config.m)


def tree_fold_assignment(config: ForestConfig, tree_index: int, n: int) -> np.ndarray:
    """Replay the fold indices tree ``tree_index`` used during selection."""
    _, fold_ss, _ = _tree_seed_sequences(config)[tree_index].spawn(3)
    return _fold_assignment(fold_ss, n, config.cv_folds)


def _fold_assignment(fold_ss, n: int, folds: int) -> np.ndarray:
    perm = np.random.default_rng(fold_ss).permutation(n)
    fold_of = np.empty(n, dtype=np.int64)
    for f, idx in enumerate(np.array_split(perm, folds)):
        fold_of[idx] = f
    return fold_of


def _build_candidate(data, config: ForestConfig, box: BoundingBox, cand_ss):
    rng = np.random.default_rng(cand_ss)
    if config.mode == PURELY_RANDOM:
        return purely_random_partition(box, config.p, rng)
    if config.mode == ADAPTIVE_AXIS:
        return adaptive_partition(box, config.p, config.t, data, rng)
    return adaptive_oblique_partition(box, config.p, config.t, data, rng)


def _candidate_volumes(partition, config: ForestConfig, mc_ss):
    if partition.mode == AXIS_PARALLEL:
        return exact_box_volumes(partition)
    return monte_carlo_volumes(partition, config.mc_points, np.random.default_rng(mc_ss))


def candidate_cv_scores(partition, volumes, data, fold_of: np.ndarray,
                        folds: int) -> np.ndarray:
    """Per-fold validation ANLL of one candidate: each fold re-counts cell
    weights from its training rows on the fixed geometry, then scores the
    held-out rows (epsilon-guarded, so empty cells stay finite)."""
    n = data.shape[0]
    leaf = partition.locate(data)
    inbox = leaf >= 0
    vols = volumes.volumes
    total = np.bincount(leaf[inbox], minlength=partition.n_leaves)
    scores = np.empty(folds)
    for f in range(folds):
        val = fold_of == f
        held = np.bincount(leaf[inbox & val], minlength=partition.n_leaves)
        dens = counts_to_densities(total - held, vols, n - int(val.sum()))
        fhat = np.zeros(int(val.sum()))
        val_leaf = leaf[val]
        ok = val_leaf >= 0
        fhat[ok] = dens[val_leaf[ok]]
        scores[f] = anll_values(fhat)
    return scores


def best_scored_tree(data, config: ForestConfig, seed_seq=None,
                     box: BoundingBox | None = None) -> tuple[DensityTree, SelectionRecord]:
    """Pick the best of ``k`` candidate partitions by cross-validated ANLL,
    then refit its counts on all rows.

    All ``k`` candidates share one fold assignment (shuffled once per tree)
    for a fair comparison; exact ties go to the lower candidate index.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    n = data.shape[0]
    if n < config.cv_folds:
        raise ValueError("need at least one sample per cross-validation fold")
    if seed_seq is None:
        seed_seq = np.random.SeedSequence(config.seed)
    elif not isinstance(seed_seq, np.random.SeedSequence):
        seed_seq = np.random.SeedSequence(seed_seq)
    if box is None:
        box = bounding_box_of(data, config.margin)

    cand_ss, fold_ss, mc_ss = seed_seq.spawn(3)
    cand_streams = cand_ss.spawn(config.k)
    mc_streams = mc_ss.spawn(config.k)
    fold_of = _fold_assignment(fold_ss, n, config.cv_folds)

    candidates = []
    fold_scores = np.empty((config.k, config.cv_folds))
    for j in range(config.k):
        part = _build_candidate(data, config, box, cand_streams[j])
        vols = _candidate_volumes(part, config, mc_streams[j])
        candidates.append((part, vols))
        fold_scores[j] = candidate_cv_scores(part, vols, data, fold_of, config.cv_folds)

    means = fold_scores.mean(axis=1)
    chosen = int(np.argmin(means))
    part, vols = candidates[chosen]
    tree = fit_tree(part, vols, data)
    record = SelectionRecord(chosen_index=chosen, candidate_scores=means,
                             fold_scores=fold_scores)
    return tree, record


def _fit_tree_task(data, config, box, seed_seq):
    return best_scored_tree(data, config, seed_seq=seed_seq, box=box)


def fit_forest(data, config: ForestConfig, workers: int = 1) -> Forest:
    """Fit ``m`` best-scored trees from independent sub-streams of the seed.

    The result is identical for any worker count.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    box = bounding_box_of(data, config.margin)
    tree_seeds = _tree_seed_sequences(config)
    if workers == 1:
        results = [_fit_tree_task(data, config, box, ss) for ss in tree_seeds]
    else:
        results = Parallel(n_jobs=workers)(
            delayed(_fit_tree_task)(data, config, box, ss) for ss in tree_seeds
        )
    trees = [t for t, _ in results]
    records = [r for _, r in results]
    return Forest(trees=trees, config=config, selection_records=records)


def eval_forest(forest: Forest, x):
    """Forest density at ``x``: the arithmetic mean of the member trees."""
    acc = None
    for tree in forest.trees:
        v = eval_tree(tree, x)
        acc = v if acc is None else acc + v
    return acc / len(forest.trees)


def integrate_forest(forest: Forest) -> float:
    """Mean of the member trees' total masses."""
    return float(np.mean([integrate_tree(t) for t in forest.trees]))
