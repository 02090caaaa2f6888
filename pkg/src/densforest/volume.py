"""Leaf cell volumes: exact products for axis-parallel cells, Monte Carlo
frequency estimates for oblique polytope cells.

The Monte Carlo estimate throws one shared uniform point cloud at the
bounding box and assigns each leaf the box volume times its hit frequency,
so frequencies sum to one by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .partition import AXIS_PARALLEL, Partition

#: Default Monte Carlo point budget per partition.
DEFAULT_MC_POINTS = 2000

EXACT = "exact"
MONTE_CARLO = "monte_carlo"


@dataclass
class VolumeTable:
    """Per-leaf Lebesgue volumes of a partition.

    ``mc_hits`` holds the integer hit counts behind a Monte Carlo estimate
    (``None`` for exact volumes); their sum equals ``mc_points`` exactly.
    """

    volumes: np.ndarray
    method: str
    box_volume: float
    mc_points: int = 0
    mc_hits: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_leaves(self) -> int:
        return self.volumes.size

    def to_dict(self) -> dict:
        doc = {
            "volumes": self.volumes.tolist(),
            "method": self.method,
            "box_volume": self.box_volume,
            "mc_points": self.mc_points,
        }
        if self.mc_hits is not None:
            doc["mc_hits"] = self.mc_hits.tolist()
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "VolumeTable":
        hits = doc.get("mc_hits")
        return cls(
            volumes=np.asarray(doc["volumes"], dtype=float),
            method=doc["method"],
            box_volume=float(doc["box_volume"]),
            mc_points=int(doc["mc_points"]),
            mc_hits=None if hits is None else np.asarray(hits, dtype=np.int64),
        )


def exact_box_volumes(partition: Partition) -> VolumeTable:
    """Exact leaf volumes as products of side lengths (axis-parallel only)."""
    if partition.mode != AXIS_PARALLEL:
        raise ValueError("exact volume unsupported for oblique")
    lower, upper = partition.leaf_bounds()
    vols = np.prod(upper - lower, axis=1)
    return VolumeTable(volumes=vols, method=EXACT, box_volume=partition.box.volume)


def monte_carlo_volumes(partition: Partition, n_points: int = DEFAULT_MC_POINTS,
                        rng=None) -> VolumeTable:
    """Monte Carlo leaf volumes from one shared uniform cloud on the box.

    Each leaf gets ``box_volume * hits / n_points``; leaves never hit get
    volume 0.
    """
    if n_points < 1:
        raise ValueError("n_points must be at least 1")
    rng = np.random.default_rng(rng)
    box = partition.box
    pts = box.lower + rng.random((n_points, box.d)) * (box.upper - box.lower)
    leaf = partition.locate(pts)
    hits = np.bincount(leaf, minlength=partition.n_leaves)
    vols = box.volume * (hits / n_points)
    return VolumeTable(volumes=vols, method=MONTE_CARLO, box_volume=box.volume,
                       mc_points=n_points, mc_hits=hits.astype(np.int64))
