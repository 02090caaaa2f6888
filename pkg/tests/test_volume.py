import numpy as np
import pytest

from densforest import (
    BoundingBox,
    Partition,
    SyntheticSpec,
    adaptive_oblique_partition,
    exact_box_volumes,
    monte_carlo_volumes,
    purely_random_partition,
    sample_synthetic,
)


def unit_box(d):
    return BoundingBox(np.zeros(d), np.ones(d))


class TestExact:
    def test_single_leaf(self):
        part = purely_random_partition(unit_box(2), 0, np.random.default_rng(0))
        table = exact_box_volumes(part)
        assert table.volumes.tolist() == [1.0]
        assert table.method == "exact" and table.mc_points == 0

    def test_proportional_cut(self):
        part = purely_random_partition(unit_box(1), 1, np.random.default_rng(3))
        table = exact_box_volumes(part)
        s = part.splits[0].proportion
        assert sorted(table.volumes) == pytest.approx(sorted([s, 1 - s]), abs=1e-15)

    def test_conservation_deep(self):
        box = BoundingBox([-1.0, 2.0, 0.0], [3.0, 5.0, 0.5])
        part = purely_random_partition(box, 200, np.random.default_rng(5))
        table = exact_box_volumes(part)
        assert abs(table.volumes.sum() - box.volume) <= 1e-9 * box.volume

    def test_oblique_rejected(self):
        data = np.random.default_rng(0).random((100, 2))
        part = adaptive_oblique_partition(unit_box(2), 3, 10, data,
                                          np.random.default_rng(1))
        with pytest.raises(ValueError, match="exact volume unsupported for oblique"):
            exact_box_volumes(part)


class TestMonteCarlo:
    def test_single_leaf_full_volume(self):
        part = purely_random_partition(unit_box(3), 0, np.random.default_rng(0))
        table = monte_carlo_volumes(part, 500, np.random.default_rng(1))
        assert table.volumes.tolist() == [1.0]
        assert table.mc_hits.sum() == 500

    def test_within_binomial_error_of_exact(self):
        box = unit_box(2)
        part = purely_random_partition(box, 20, np.random.default_rng(7))
        exact = exact_box_volumes(part).volumes
        n_pts = 100_000
        table = monte_carlo_volumes(part, n_pts, np.random.default_rng(8))
        frac = exact / box.volume
        bound = 4 * np.sqrt(frac * (1 - frac) / n_pts) * box.volume
        assert (np.abs(table.volumes - exact) <= bound).all()

    def test_frequencies_sum_exactly(self):
        part = purely_random_partition(unit_box(3), 40, np.random.default_rng(2))
        table = monte_carlo_volumes(part, 3333, np.random.default_rng(3))
        assert int(table.mc_hits.sum()) == 3333

    def test_oblique_halves(self):
        doc = {
            "mode": "oblique",
            "bounding_box": {"lower": [0.0, 0.0], "upper": [1.0, 1.0]},
            "splits": [{"cell_id": 0, "normal": [1.0, 0.0], "offset": -0.5,
                        "anchor": [0.5, 0.5], "left": 1, "right": 2}],
        }
        part = Partition.from_dict(doc)
        table = monte_carlo_volumes(part, 2000, np.random.default_rng(4))
        assert table.volumes[0] == pytest.approx(0.5, abs=0.05)
        assert table.volumes[1] == pytest.approx(0.5, abs=0.05)

    def test_zero_hit_cells_get_zero_volume(self):
        # a tiny sliver with few MC points is likely missed
        box = unit_box(1)
        part = purely_random_partition(box, 60, np.random.default_rng(11))
        table = monte_carlo_volumes(part, 50, np.random.default_rng(12))
        missed = table.mc_hits == 0
        assert missed.any()
        assert (table.volumes[missed] == 0).all()

    def test_doubling_points_does_not_hurt(self):
        # convergence: mean abs deviation from exact volumes does not grow
        box = unit_box(2)
        part = purely_random_partition(box, 20, np.random.default_rng(0))
        exact = exact_box_volumes(part).volumes
        devs = {500: [], 1000: []}
        for seed in range(50):
            for n_pts in devs:
                table = monte_carlo_volumes(part, n_pts, np.random.default_rng(100 + seed))
                devs[n_pts].append(np.abs(table.volumes - exact).mean())
        assert np.mean(devs[1000]) <= np.mean(devs[500])

    def test_invalid_points(self):
        part = purely_random_partition(unit_box(1), 1, np.random.default_rng(0))
        with pytest.raises(ValueError):
            monte_carlo_volumes(part, 0, np.random.default_rng(0))

    def test_serialization_round_trip(self):
        data = sample_synthetic(SyntheticSpec("type1", 2), 300, np.random.default_rng(0))
        part = adaptive_oblique_partition(unit_box(2), 10, 10, data,
                                          np.random.default_rng(1))
        from densforest import VolumeTable
        table = monte_carlo_volumes(part, 777, np.random.default_rng(2))
        clone = VolumeTable.from_dict(table.to_dict())
        assert np.array_equal(clone.volumes, table.volumes)
        assert np.array_equal(clone.mc_hits, table.mc_hits)
        assert clone.mc_points == 777
