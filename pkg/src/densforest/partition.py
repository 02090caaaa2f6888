"""Random space partitions over an axis-aligned bounding box.

Three splitting criteria are provided:

* ``purely_random_partition`` — the cell to split, the split dimension and
  the cut proportion are all drawn at random, independent of the data.
* ``adaptive_partition`` — the cell to split is the one holding the most of
  ``t`` training points drawn at random; dimension and proportion stay random.
  This biases splits toward sample-dense regions.
* ``adaptive_oblique_partition`` — like the adaptive criterion, but each
  split is a hyperplane with a random normal anchored at the centroid of the
  probe points inside the chosen cell, so leaf cells are convex polytopes.

A :class:`Partition` records the full split history; ``locate`` replays it
to map points to leaf cells.  Boundary points always belong to the lower /
``<=`` side child, which makes location deterministic.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

logger = logging.getLogger(__name__)

#: Marker returned by ``locate`` for points outside the bounding box.
OUTSIDE = -1

AXIS_PARALLEL = "axis_parallel"
OBLIQUE = "oblique"

# Per-side absolute padding applied to zero-range dimensions so every box
# keeps positive volume.
_DEGENERATE_PAD = 1e-6

# Oblique robustness: hyperplane redraws per cell before re-selecting the
# cell, and cell re-selections per split before accepting a degenerate cut.
_MAX_NORMAL_REDRAWS = 20
_MAX_CELL_RESELECTS = 20


class BoundingBox:
    """Axis-aligned box ``[lower_i, upper_i]`` per dimension, d >= 1."""

    __slots__ = ("lower", "upper")

    def __init__(self, lower, upper):
        lower = np.ascontiguousarray(lower, dtype=float)
        upper = np.ascontiguousarray(upper, dtype=float)
        if lower.ndim != 1 or upper.shape != lower.shape or lower.size < 1:
            raise ValueError("lower and upper must be 1-d vectors of equal length >= 1")
        if not (np.isfinite(lower).all() and np.isfinite(upper).all()):
            raise ValueError("non-finite input")
        if not (upper > lower).all():
            raise ValueError("upper must exceed lower in every dimension")
        self.lower = lower
        self.upper = upper
        self.lower.flags.writeable = False
        self.upper.flags.writeable = False

    @property
    def d(self) -> int:
        return self.lower.size

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask of rows inside the closed box."""
        points = np.atleast_2d(points)
        return ((points >= self.lower) & (points <= self.upper)).all(axis=1)

    def __eq__(self, other):
        return (
            isinstance(other, BoundingBox)
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
        )

    def __repr__(self):
        return f"BoundingBox(lower={self.lower.tolist()}, upper={self.upper.tolist()})"

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "BoundingBox":
        return cls(d["lower"], d["upper"])


def bounding_box_of(data, margin: float = 0.0) -> BoundingBox:
    """Smallest axis-aligned box containing ``data``, padded by ``margin``.

    Each side is extended by ``margin * range`` of that dimension.  Dimensions
    with zero range are padded by a fixed small absolute width instead so the
    box keeps positive volume.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
        raise ValueError("empty dataset")
    if not np.isfinite(data).all():
        raise ValueError("non-finite input")
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    lo = data.min(axis=0)
    hi = data.max(axis=0)
    rng_ = hi - lo
    pad = margin * rng_
    degenerate = rng_ == 0
    if degenerate.any():
        pad = pad.copy()
        pad[degenerate] = np.maximum(_DEGENERATE_PAD, _DEGENERATE_PAD * np.abs(lo[degenerate]))
    return BoundingBox(lo - pad, hi + pad)


@dataclass(frozen=True)
class AxisSplit:
    """One axis-parallel split: cell ``cell_id`` cut in ``dimension`` so the
    lower child's side length is ``proportion`` times the parent's."""

    cell_id: int
    dimension: int
    proportion: float
    cut: float  # absolute coordinate; derived from proportion and the cell bounds
    left: int   # lower-side child, owns boundary points
    right: int

    def to_dict(self) -> dict:
        return {
            "cell_id": self.cell_id,
            "dimension": self.dimension,
            "proportion": self.proportion,
            "cut": self.cut,
            "left": self.left,
            "right": self.right,
        }


@dataclass(frozen=True)
class ObliqueSplit:
    """One oblique split: cell ``cell_id`` cut by the hyperplane
    ``<normal, x> + offset = 0`` anchored at ``anchor``."""

    cell_id: int
    normal: np.ndarray
    offset: float
    anchor: np.ndarray
    left: int   # side <normal, x> + offset <= 0, owns boundary points
    right: int

    def to_dict(self) -> dict:
        return {
            "cell_id": self.cell_id,
            "normal": self.normal.tolist(),
            "offset": self.offset,
            "anchor": self.anchor.tolist(),
            "left": self.left,
            "right": self.right,
        }


@dataclass(frozen=True)
class Cell:
    """A leaf cell: its node id, leaf index, and the constraint chain from the
    root.  Box bounds are only available for axis-parallel partitions.

    ``constraints`` entries are ``("axis", dimension, cut, side)`` or
    ``("plane", normal, offset, side)`` with side -1 for the ``<=`` branch and
    +1 for the strict ``>`` branch.
    """

    id: int
    leaf_index: int
    constraints: tuple
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None


class Partition:
    """A rooted history of ``p`` splits over a bounding box with ``p + 1``
    leaf cells.

    Nodes are numbered in creation order: the root is 0 and split ``i``
    (0-based) creates nodes ``2i + 1`` (lower child) and ``2i + 2``.  Leaves
    are indexed 0..p in node-id order; ``locate`` returns leaf indices.
    """

    def __init__(self, box: BoundingBox, mode: str, splits, parent, node_lower=None,
                 node_upper=None, centroid_fallbacks: int = 0, forced_splits: int = 0):
        self.box = box
        self.mode = mode
        self.splits = list(splits)
        self._parent = np.asarray(parent, dtype=np.int64)
        self._node_lower = node_lower  # list of per-node lower bounds (axis mode)
        self._node_upper = node_upper
        self.centroid_fallbacks = centroid_fallbacks
        self.forced_splits = forced_splits

        n_nodes = 2 * len(self.splits) + 1
        is_leaf = np.ones(n_nodes, dtype=bool)
        for s in self.splits:
            is_leaf[s.cell_id] = False
        self.leaf_ids = np.flatnonzero(is_leaf)
        self._node_to_leaf = np.full(n_nodes, -1, dtype=np.int64)
        self._node_to_leaf[self.leaf_ids] = np.arange(self.leaf_ids.size)

    @property
    def p(self) -> int:
        return len(self.splits)

    @property
    def n_leaves(self) -> int:
        return self.leaf_ids.size

    @property
    def d(self) -> int:
        return self.box.d

    def locate(self, x) -> np.ndarray | int:
        """Leaf index for each point, or ``OUTSIDE`` for points out of the box.

        Points are routed down the split history; a point exactly on a cut
        belongs to the lower / ``<=`` side child.
        """
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 1
        pts = np.atleast_2d(x)
        if pts.shape[1] != self.d:
            raise ValueError(f"expected points of dimension {self.d}")
        node = np.zeros(pts.shape[0], dtype=np.int64)
        node[~self.box.contains(pts)] = OUTSIDE
        for s in self.splits:
            sel = np.flatnonzero(node == s.cell_id)
            if sel.size == 0:
                continue
            if isinstance(s, AxisSplit):
                low = pts[sel, s.dimension] <= s.cut
            else:
                low = pts[sel] @ s.normal + s.offset <= 0.0
            node[sel] = np.where(low, s.left, s.right)
        out = np.where(node >= 0, self._node_to_leaf[node], OUTSIDE)
        return int(out[0]) if scalar else out

    def leaf_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-leaf (lower, upper) arrays; axis-parallel partitions only."""
        if self.mode != AXIS_PARALLEL:
            raise ValueError("leaf bounds unsupported for oblique partitions")
        lower = np.stack([self._node_lower[i] for i in self.leaf_ids])
        upper = np.stack([self._node_upper[i] for i in self.leaf_ids])
        return lower, upper

    def node_bounds(self, node_id: int) -> tuple[np.ndarray, np.ndarray]:
        """Box of any node (axis-parallel partitions only)."""
        if self.mode != AXIS_PARALLEL:
            raise ValueError("node bounds unsupported for oblique partitions")
        return self._node_lower[node_id], self._node_upper[node_id]

    def _constraint_chain(self, node_id: int) -> tuple:
        """Constraints accumulated from the root down to ``node_id``."""
        by_parent = self._split_by_parent
        chain = []
        node = node_id
        while node != 0:
            s = by_parent[int(self._parent[node])]
            side = -1 if node == s.left else 1
            if isinstance(s, AxisSplit):
                chain.append(("axis", s.dimension, s.cut, side))
            else:
                chain.append(("plane", s.normal, s.offset, side))
            node = self._parent[node]
        chain.reverse()
        return tuple(chain)

    @cached_property
    def _split_by_parent(self) -> dict:
        return {s.cell_id: s for s in self.splits}

    @cached_property
    def leaves(self) -> list[Cell]:
        """Leaf cells in leaf-index order, each carrying its constraint chain."""
        cells = []
        for j, node_id in enumerate(self.leaf_ids):
            lower = upper = None
            if self.mode == AXIS_PARALLEL:
                lower = self._node_lower[node_id]
                upper = self._node_upper[node_id]
            cells.append(Cell(id=int(node_id), leaf_index=j,
                              constraints=self._constraint_chain(int(node_id)),
                              lower=lower, upper=upper))
        return cells

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "bounding_box": self.box.to_dict(),
            "splits": [s.to_dict() for s in self.splits],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, doc: dict) -> "Partition":
        box = BoundingBox.from_dict(doc["bounding_box"])
        mode = doc["mode"]
        if mode not in (AXIS_PARALLEL, OBLIQUE):
            raise ValueError(f"unknown partition mode {mode!r}")
        b = _PartitionBuilder(box, mode)
        for entry in doc["splits"]:
            cell_id = int(entry["cell_id"])
            if cell_id not in b.leaf_set:
                raise ValueError("invalid split history: cell is not a current leaf")
            if mode == AXIS_PARALLEL:
                b.split_axis(cell_id, int(entry["dimension"]), float(entry["proportion"]),
                             cut=float(entry["cut"]) if "cut" in entry else None)
            else:
                normal = np.asarray(entry["normal"], dtype=float)
                anchor = np.asarray(entry["anchor"], dtype=float)
                b.split_plane(cell_id, normal, float(entry["offset"]), anchor)
            made = b.splits[-1]
            if made.left != int(entry["left"]) or made.right != int(entry["right"]):
                raise ValueError("invalid split history: child ids do not replay")
        return b.finish()

    @classmethod
    def from_json(cls, text: str) -> "Partition":
        return cls.from_dict(json.loads(text))


class _PartitionBuilder:
    """Incremental construction of a partition, tracking current leaves."""

    def __init__(self, box: BoundingBox, mode: str):
        self.box = box
        self.mode = mode
        self.splits = []
        self.parent = [0]
        self.leaves = [0]            # current leaf node ids, creation order
        self.leaf_set = {0}
        self.centroid_fallbacks = 0
        self.forced_splits = 0
        if mode == AXIS_PARALLEL:
            self.node_lower = [box.lower]
            self.node_upper = [box.upper]

    def _new_children(self, cell_id: int) -> tuple[int, int]:
        left = 2 * len(self.splits) + 1
        right = left + 1
        self.parent.extend([cell_id, cell_id])
        self.leaves.remove(cell_id)
        self.leaf_set.discard(cell_id)
        self.leaves.extend([left, right])
        self.leaf_set.update((left, right))
        return left, right

    def split_axis(self, cell_id: int, dimension: int, proportion: float,
                   cut: float | None = None) -> AxisSplit:
        if not 0.0 < proportion < 1.0:
            raise ValueError("proportion must lie strictly inside (0, 1)")
        lo = self.node_lower[cell_id]
        hi = self.node_upper[cell_id]
        if cut is None:
            cut = lo[dimension] + proportion * (hi[dimension] - lo[dimension])
            # Record the proportion the float cut actually realizes (within
            # half an ulp of the drawn one) so geometry and record agree.
            achieved = (cut - lo[dimension]) / (hi[dimension] - lo[dimension])
            proportion = float(min(max(achieved, np.nextafter(0.0, 1.0)),
                                   np.nextafter(1.0, 0.0)))
        if not lo[dimension] < cut < hi[dimension]:
            raise ValueError("degenerate cut: cell too thin to split in this dimension")
        left, right = self._new_children(cell_id)
        low_hi = hi.copy()
        low_hi[dimension] = cut
        high_lo = lo.copy()
        high_lo[dimension] = cut
        self.node_lower.extend([lo, high_lo])
        self.node_upper.extend([low_hi, hi])
        split = AxisSplit(cell_id, dimension, proportion, float(cut), left, right)
        self.splits.append(split)
        return split

    def split_plane(self, cell_id: int, normal: np.ndarray, offset: float,
                    anchor: np.ndarray) -> ObliqueSplit:
        if not np.any(normal):
            raise ValueError("normal must not be the zero vector")
        left, right = self._new_children(cell_id)
        normal = normal.copy()
        anchor = anchor.copy()
        normal.flags.writeable = False
        anchor.flags.writeable = False
        split = ObliqueSplit(cell_id, normal, float(offset), anchor, left, right)
        self.splits.append(split)
        return split

    def finish(self) -> Partition:
        return Partition(
            self.box, self.mode, self.splits, self.parent,
            node_lower=getattr(self, "node_lower", None),
            node_upper=getattr(self, "node_upper", None),
            centroid_fallbacks=self.centroid_fallbacks,
            forced_splits=self.forced_splits,
        )


def _draw_proportion(rng) -> float:
    s = float(rng.random())
    while s == 0.0:
        s = float(rng.random())
    return s


def purely_random_partition(box: BoundingBox, p: int, rng) -> Partition:
    """Partition ``box`` with ``p`` axis-parallel splits, all choices random.

    At each step the cell is drawn uniformly from the current leaves, the
    dimension uniformly from the ``d`` axes, and the cut proportion from
    U(0, 1); the lower child's side length is the proportion times the
    parent's.
    """
    if p < 0:
        raise ValueError("split count must be nonnegative")
    rng = np.random.default_rng(rng)
    b = _PartitionBuilder(box, AXIS_PARALLEL)
    for _ in range(p):
        cell = b.leaves[int(rng.integers(len(b.leaves)))]
        dim = int(rng.integers(box.d))
        b.split_axis(cell, dim, _draw_proportion(rng))
    return b.finish()


def _validate_adaptive_args(box, p, t, data):
    if p < 0:
        raise ValueError("split count must be nonnegative")
    if t < 1:
        raise ValueError("probe sample count must be at least 1")
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if data.ndim != 2 or data.shape[0] < 1:
        raise ValueError("empty dataset")
    if data.shape[1] != box.d:
        raise ValueError("data dimension does not match the bounding box")
    if not np.isfinite(data).all():
        raise ValueError("non-finite input")
    return data


def _modal_leaf(builder, node_of, probes, rng, n) -> tuple[int, np.ndarray]:
    """Cell holding most probe points; ties go to the smallest cell id."""
    idx = rng.integers(0, n, size=probes)
    nodes = node_of[idx]
    ids = np.fromiter(builder.leaf_set, dtype=np.int64)
    ids.sort()
    counts = np.bincount(nodes[nodes >= 0], minlength=int(ids.max()) + 1)[ids]
    best = int(ids[counts == counts.max()].min())
    return best, idx


def adaptive_partition(box: BoundingBox, p: int, t: int, data, rng) -> Partition:
    """Axis-parallel partition where each split targets the cell holding the
    mode of ``t`` training points drawn uniformly with replacement."""
    data = _validate_adaptive_args(box, p, t, data)
    rng = np.random.default_rng(rng)
    n = data.shape[0]
    node_of = np.zeros(n, dtype=np.int64)
    node_of[~box.contains(data)] = OUTSIDE
    b = _PartitionBuilder(box, AXIS_PARALLEL)
    for _ in range(p):
        cell, _ = _modal_leaf(b, node_of, t, rng, n)
        dim = int(rng.integers(box.d))
        s = b.split_axis(cell, dim, _draw_proportion(rng))
        rows = np.flatnonzero(node_of == cell)
        low = data[rows, dim] <= s.cut
        node_of[rows] = np.where(low, s.left, s.right)
    return b.finish()


def _strictly_interior(x, box, chain) -> bool:
    if not ((x > box.lower).all() and (x < box.upper).all()):
        return False
    for kind, a, c, side in chain:
        if kind == "axis":
            v = x[a] - c
        else:
            v = float(x @ a) + c
        if side < 0 and not v < 0:
            return False
        if side > 0 and not v > 0:
            return False
    return True


def adaptive_oblique_partition(box: BoundingBox, p: int, t: int, data, rng) -> Partition:
    """Adaptive partition with oblique splits.

    The chosen cell is cut by the hyperplane ``<W, x> + b = 0`` with W drawn
    uniformly on [-1, 1]^d and b anchored at the centroid of the probe points
    falling in the cell.  Splits that would leave an empty child are redrawn;
    after repeated failures the cell is re-selected, and as a last resort the
    split is accepted as drawn so construction always terminates.
    """
    data = _validate_adaptive_args(box, p, t, data)
    rng = np.random.default_rng(rng)
    n = data.shape[0]
    node_of = np.zeros(n, dtype=np.int64)
    node_of[~box.contains(data)] = OUTSIDE
    b = _PartitionBuilder(box, OBLIQUE)
    mid = 0.5 * (box.lower + box.upper)

    for _ in range(p):
        accepted = last_draw = None
        for _attempt in range(_MAX_CELL_RESELECTS):
            cell, probe_idx = _modal_leaf(b, node_of, t, rng, n)
            in_cell = probe_idx[node_of[probe_idx] == cell]
            if in_cell.size:
                anchor = data[in_cell].mean(axis=0)
            else:
                anchor = mid.copy()
                b.centroid_fallbacks += 1
                logger.info("no probe points in cell %d; anchoring split at the box midpoint", cell)
            chain = None
            rows = np.flatnonzero(node_of == cell)
            vals_rows = data[rows]
            for _redraw in range(_MAX_NORMAL_REDRAWS):
                normal = rng.uniform(-1.0, 1.0, size=box.d)
                if not np.any(normal):
                    continue
                offset = -float(normal @ anchor)
                v = vals_rows @ normal + offset
                last_draw = (cell, normal, offset, anchor, rows, v)
                if (v < 0).any() and (v > 0).any():
                    accepted = last_draw
                    break
                if chain is None:
                    chain = _leaf_chain(b, cell)
                if _strictly_interior(anchor, box, chain):
                    accepted = last_draw
                    break
            if accepted is not None:
                break
        if accepted is None:
            # No cell admitted a clean cut; keep the last draw so the split
            # count contract holds (the empty child gets zero volume later).
            b.forced_splits += 1
            logger.warning("accepting a possibly degenerate oblique split")
            accepted = last_draw
        cell, normal, offset, anchor, rows, v = accepted
        s = b.split_plane(cell, normal, offset, anchor)
        node_of[rows] = np.where(v <= 0, s.left, s.right)
    return b.finish()


def _leaf_chain(builder, node_id):
    """Constraint chain for a node of a partition still under construction."""
    by_parent = {s.cell_id: s for s in builder.splits}
    chain = []
    node = node_id
    while node != 0:
        parent = builder.parent[node]
        s = by_parent[parent]
        side = -1 if node == s.left else 1
        if isinstance(s, AxisSplit):
            chain.append(("axis", s.dimension, s.cut, side))
        else:
            chain.append(("plane", s.normal, s.offset, side))
        node = parent
    chain.reverse()
    return chain


def locate(partition: Partition, x):
    """Leaf index of ``x`` in ``partition`` (``OUTSIDE`` if out of the box)."""
    return partition.locate(x)
