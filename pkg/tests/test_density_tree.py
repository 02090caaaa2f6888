import numpy as np
import pytest

from densforest import (
    BoundingBox,
    DensityTree,
    SyntheticSpec,
    adaptive_partition,
    bounding_box_of,
    eval_tree,
    exact_box_volumes,
    fit_tree,
    integrate_tree,
    monte_carlo_volumes,
    purely_random_partition,
    sample_synthetic,
)


def unit_box(d):
    return BoundingBox(np.zeros(d), np.ones(d))


def test_uniform_histogram():
    part = purely_random_partition(unit_box(1), 0, np.random.default_rng(0))
    data = np.linspace(0.05, 0.95, 10)[:, None]
    tree = fit_tree(part, exact_box_volumes(part), data)
    assert eval_tree(tree, np.array([0.5])) == pytest.approx(1.0)
    assert tree.counts.tolist() == [10]


def test_two_cell_densities():
    part = purely_random_partition(unit_box(1), 1, np.random.default_rng(3))
    s = part.splits[0].cut
    # 2 points in the lower cell of width s, 8 in the complement
    data = np.concatenate([np.linspace(0, s * 0.9, 2), np.linspace(s * 1.05, 0.99, 8)])[:, None]
    tree = fit_tree(part, exact_box_volumes(part), data)
    low = tree.partition.locate(np.array([s / 2]))
    high = 1 - low
    assert tree.densities[low] == pytest.approx(2 / (10 * s))
    assert tree.densities[high] == pytest.approx(8 / (10 * (1 - s)))


def test_normalization_on_synthetic():
    spec = SyntheticSpec("type1", 1)
    data = sample_synthetic(spec, 5000, np.random.default_rng(1))
    box = bounding_box_of(data)
    part = adaptive_partition(box, 64, 30, data, np.random.default_rng(2))
    tree = fit_tree(part, exact_box_volumes(part), data)
    assert integrate_tree(tree) == pytest.approx(1.0, abs=1e-9)


def test_eval_outside_box_is_zero():
    part = purely_random_partition(unit_box(2), 4, np.random.default_rng(0))
    tree = fit_tree(part, exact_box_volumes(part),
                    np.random.default_rng(1).random((50, 2)))
    assert eval_tree(tree, np.array([1.5, 0.5])) == 0.0


def test_empty_cell_is_zero():
    part = purely_random_partition(unit_box(1), 1, np.random.default_rng(3))
    cut = part.splits[0].cut
    data = np.full((5, 1), cut + (1 - cut) / 2)  # all mass in the upper cell
    tree = fit_tree(part, exact_box_volumes(part), data)
    assert eval_tree(tree, np.array([cut / 2])) == 0.0


def test_eval_matches_tables_exactly():
    data = sample_synthetic(SyntheticSpec("type1", 2), 2000, np.random.default_rng(5))
    box = bounding_box_of(data)
    part = adaptive_partition(box, 50, 30, data, np.random.default_rng(6))
    tree = fit_tree(part, exact_box_volumes(part), data)
    pts = np.random.default_rng(7).random((10_000, 2))
    leaf = part.locate(pts)
    expected = np.zeros(len(pts))
    ok = leaf >= 0
    expected[ok] = tree.counts[leaf[ok]] / (tree.n_train * tree.volumes.volumes[leaf[ok]])
    assert np.array_equal(eval_tree(tree, pts), expected)


def test_integrate_with_mc_volumes_is_exact_identity():
    data = sample_synthetic(SyntheticSpec("type1", 1), 500, np.random.default_rng(1))
    box = bounding_box_of(data)
    part = purely_random_partition(box, 80, np.random.default_rng(2))
    table = monte_carlo_volumes(part, 100, np.random.default_rng(3))
    tree = fit_tree(part, table, data)
    covered = table.volumes > 0
    assert integrate_tree(tree) == tree.counts[covered].sum() / tree.n_train
    if tree.zero_volume_count_leaves:
        assert integrate_tree(tree) < 1.0


def test_out_of_box_mass_fraction():
    box = BoundingBox([0.0], [1.0])
    part = purely_random_partition(box, 2, np.random.default_rng(0))
    data = np.concatenate([np.linspace(0.1, 0.9, 7), [1.5, 2.0, -1.0]])[:, None]
    tree = fit_tree(part, exact_box_volumes(part), data)
    assert tree.n_outside == 3
    assert integrate_tree(tree) == pytest.approx(0.7, abs=1e-9)


def test_all_outside_is_an_error():
    box = BoundingBox([0.0], [1.0])
    part = purely_random_partition(box, 1, np.random.default_rng(0))
    with pytest.raises(ValueError, match="no in-box training data"):
        fit_tree(part, exact_box_volumes(part), np.array([[2.0], [3.0]]))


def test_piecewise_constant():
    data = np.random.default_rng(0).random((200, 2))
    part = purely_random_partition(unit_box(2), 10, np.random.default_rng(1))
    tree = fit_tree(part, exact_box_volumes(part), data)
    pts = np.random.default_rng(2).random((2000, 2))
    leaf = part.locate(pts)
    vals = eval_tree(tree, pts)
    for j in np.unique(leaf):
        assert np.unique(vals[leaf == j]).size == 1


def test_refit_on_superset_nonnegative():
    data = np.random.default_rng(3).random((100, 2))
    part = purely_random_partition(unit_box(2), 8, np.random.default_rng(4))
    table = exact_box_volumes(part)
    bigger = np.vstack([data, np.random.default_rng(5).random((50, 2))])
    tree = fit_tree(part, table, bigger)
    assert (tree.densities >= 0).all()


def test_serialization_round_trip():
    data = sample_synthetic(SyntheticSpec("type2", 2), 400, np.random.default_rng(8))
    box = bounding_box_of(data)
    part = adaptive_partition(box, 20, 10, data, np.random.default_rng(9))
    tree = fit_tree(part, exact_box_volumes(part), data)
    clone = DensityTree.from_json(tree.to_json())
    pts = np.random.default_rng(10).random((1000, 2))
    assert np.array_equal(eval_tree(clone, pts), eval_tree(tree, pts))
    assert clone.n_train == tree.n_train and clone.n_outside == tree.n_outside
