"""Piecewise-constant density trees: per-leaf mass over Lebesgue volume.

A fitted tree assigns each leaf the density ``count / (n_train * volume)``
and zero everywhere outside the bounding box.  Leaves with zero volume get
density zero as well; if such a leaf holds training points the tree's mass
identity breaks, which is surfaced via ``zero_volume_count_leaves``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .partition import OUTSIDE, Partition
from .volume import VolumeTable


@dataclass
class DensityTree:
    """A partition, its volume table, and per-leaf training counts."""

    partition: Partition
    volumes: VolumeTable
    counts: np.ndarray          # per-leaf nonnegative integers
    n_train: int                # total training rows, including out-of-box ones
    n_outside: int = 0          # training rows outside the bounding box
    _densities: np.ndarray | None = field(default=None, repr=False)

    @property
    def densities(self) -> np.ndarray:
        """Per-leaf densities ``count / (n_train * volume)``, 0 where volume is 0."""
        if self._densities is None:
            v = self.volumes.volumes
            d = np.zeros_like(v)
            ok = v > 0
            d[ok] = self.counts[ok] / (self.n_train * v[ok])
            self._densities = d
        return self._densities

    @property
    def zero_volume_count_leaves(self) -> int:
        """Leaves holding training points but carrying zero volume (possible
        only under Monte Carlo volumes); these break the mass identity."""
        return int(((self.volumes.volumes == 0) & (self.counts > 0)).sum())

    def to_dict(self) -> dict:
        return {
            "partition": self.partition.to_dict(),
            "volumes": self.volumes.to_dict(),
            "counts": self.counts.tolist(),
            "n_train": self.n_train,
            "n_outside": self.n_outside,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, doc: dict) -> "DensityTree":
        return cls(
            partition=Partition.from_dict(doc["partition"]),
            volumes=VolumeTable.from_dict(doc["volumes"]),
            counts=np.asarray(doc["counts"], dtype=np.int64),
            n_train=int(doc["n_train"]),
            n_outside=int(doc.get("n_outside", 0)),
        )

    @classmethod
    def from_json(cls, text: str) -> "DensityTree":
        return cls.from_dict(json.loads(text))


def fit_tree(partition: Partition, volumes: VolumeTable, data) -> DensityTree:
    """Count training rows per leaf and return the fitted tree.

    Rows outside the bounding box contribute to no leaf but still count
    toward ``n_train``; fitting fails only if no row lands inside.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if data.shape[0] < 1:
        raise ValueError("empty dataset")
    if volumes.n_leaves != partition.n_leaves:
        raise ValueError("volume table does not match the partition")
    leaf = partition.locate(data)
    outside = int((leaf == OUTSIDE).sum())
    n = data.shape[0]
    if outside == n:
        raise ValueError("no in-box training data")
    counts = np.bincount(leaf[leaf >= 0], minlength=partition.n_leaves).astype(np.int64)
    return DensityTree(partition, volumes, counts, n_train=n, n_outside=outside)


def counts_to_densities(counts: np.ndarray, volumes: np.ndarray, n_train: int) -> np.ndarray:
    """Densities for arbitrary counts on a fixed geometry (used by fold fits)."""
    d = np.zeros_like(volumes)
    ok = volumes > 0
    d[ok] = counts[ok] / (n_train * volumes[ok])
    return d


def eval_tree(tree: DensityTree, x):
    """Density at ``x``: the containing leaf's density, 0 outside the box."""
    leaf = tree.partition.locate(x)
    dens = tree.densities
    if np.isscalar(leaf):
        return float(dens[leaf]) if leaf != OUTSIDE else 0.0
    out = np.zeros(leaf.shape, dtype=float)
    ok = leaf != OUTSIDE
    out[ok] = dens[leaf[ok]]
    return out


def integrate_tree(tree: DensityTree) -> float:
    """Total mass ``sum_j density_j * volume_j``, evaluated analytically.

    Each nonzero-volume leaf contributes exactly ``count / n_train``, so the
    sum telescopes to the in-box mass fraction over leaves with volume.
    """
    ok = tree.volumes.volumes > 0
    return float(tree.counts[ok].sum() / tree.n_train)
