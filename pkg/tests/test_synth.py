import itertools

import numpy as np
import pytest

from bayesrisk import bezier, demos, synth
from bayesrisk.errors import ContractViolation, DomainError


class TestGenWorld:
    def test_deterministic(self):
        a = synth.gen_world(4, 8, seed=7)
        b = synth.gen_world(4, 8, seed=7)
        for ca, cb in zip(a.categories, b.categories):
            assert ca.name == cb.name
            np.testing.assert_array_equal(ca.mean, cb.mean)
        assert a.ratings.entries == b.ratings.entries

    def test_two_categories_one_pair(self):
        world = synth.gen_world(2, 8, seed=0)
        assert len(world.ratings.entries) == 1

    def test_separation_guarantee(self):
        for seed in range(5):
            world = synth.gen_world(5, 16, seed=seed)
            for a, b in itertools.combinations(world.categories, 2):
                gap = np.linalg.norm(a.mean - b.mean)
                assert gap >= synth.SEPARATION_FACTOR * max(a.std, b.std)

    def test_needs_two_categories(self):
        with pytest.raises(DomainError):
            synth.gen_world(1, 8)


class TestGenDemos:
    def test_rating5_mean_distance(self):
        rng = np.random.default_rng(0)
        d = synth._truncated_distances(synth.mean_distance_for_rating(5), 10_000, rng)
        assert abs(d.mean() - 0.15) <= 0.01

    def test_rating1_dominated_by_rating5(self):
        # stochastic order: the risky pair keeps larger distances everywhere
        rng = np.random.default_rng(1)
        risky = synth._truncated_distances(synth.mean_distance_for_rating(1), 5000, rng)
        safe = synth._truncated_distances(synth.mean_distance_for_rating(5), 5000, rng)
        grid = np.linspace(0.0, 2.0, 100)
        cdf_risky = np.searchsorted(np.sort(risky), grid) / risky.size
        cdf_safe = np.searchsorted(np.sort(safe), grid) / safe.size
        assert np.all(cdf_risky <= cdf_safe + 1e-12)

    def test_log_bytes_deterministic(self, tmp_path):
        world = synth.gen_world(3, 8, seed=0)
        p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
        synth.gen_demos(world, 2, 5, p1, seed=3)
        synth.gen_demos(world, 2, 5, p2, seed=3)
        assert p1.read_bytes() == p2.read_bytes()

    def test_fitted_targets_respect_ratings(self):
        # pair CDF targets from the generator keep the stochastic order
        world = synth.gen_world(3, 8, seed=0)
        records = synth.gen_demo_records(world, 3, 30, seed=1)
        groups = demos.group_by_trajectory(records)
        grid = np.linspace(0.0, 2.0, 100)
        by_pair = {}
        for (a, b) in itertools.combinations([c.name for c in world.categories], 2):
            curves = []
            for tid, recs in groups.items():
                if tid.startswith(f"{a}-{b}-"):
                    curves.append(bezier.evaluate_at_distance(
                        demos.fit_trajectory_curve(recs, 2.0), grid))
            by_pair[(a, b)] = np.mean(curves, axis=0)
        for p1, p2 in itertools.combinations(by_pair, 2):
            r1, r2 = world.ratings.entries[p1][0], world.ratings.entries[p2][0]
            if r1 == r2:
                continue
            low, high = (p1, p2) if r1 < r2 else (p2, p1)
            assert np.mean(by_pair[low] <= by_pair[high] + 5e-3) >= 0.9


class TestGenScene:
    def test_single_full_frame_region(self):
        world = synth.gen_world(2, 8, seed=0)
        name = world.categories[1].name
        layout = [synth.Region(name, 0, 0, 6, 6, 0.4)]
        scene = synth.gen_scene(world, layout, 6, 6, world.categories[0].name, seed=0)
        assert np.all(scene.masks == 1)
        assert scene.regions[1][0] == name
        assert np.all(scene.distances.data == 0.4)

    def test_shelf_layout_five_regions(self):
        world = synth.gen_world(6, 8, seed=4)
        names = [c.name for c in world.categories]
        layout = synth.shelf_layout(names[1:], 10, 30)
        scene = synth.gen_scene(world, layout, 10, 30, names[0], seed=0)
        labels = set(np.unique(scene.masks)) - {0}
        assert labels == {1, 2, 3, 4, 5}
        for label in labels:
            cat, rating = scene.regions[label]
            expected = world.ratings.entries[tuple(sorted((names[0], cat)))][0]
            assert rating == expected

    def test_manip_self_region_is_safe(self):
        world = synth.gen_world(2, 8, seed=0)
        name = world.categories[0].name
        layout = [synth.Region(name, 0, 0, 4, 4, 0.4)]
        scene = synth.gen_scene(world, layout, 4, 4, name, seed=0)
        assert scene.regions[1][1] == 5

    def test_same_seed_identical(self):
        world = synth.gen_world(3, 8, seed=0)
        layout = synth.shelf_layout([c.name for c in world.categories[1:]], 8, 12)
        a = synth.gen_scene(world, layout, 8, 12, world.categories[0].name, seed=9)
        b = synth.gen_scene(world, layout, 8, 12, world.categories[0].name, seed=9)
        np.testing.assert_array_equal(a.features.data, b.features.data)
        np.testing.assert_array_equal(a.masks, b.masks)

    def test_overlap_rejected(self):
        world = synth.gen_world(2, 8, seed=0)
        name = world.categories[1].name
        layout = [synth.Region(name, 0, 0, 4, 4, 0.4), synth.Region(name, 2, 2, 4, 4, 0.4)]
        with pytest.raises(ContractViolation):
            synth.gen_scene(world, layout, 8, 8, world.categories[0].name)

    def test_region_must_fit(self):
        world = synth.gen_world(2, 8, seed=0)
        layout = [synth.Region(world.categories[1].name, 0, 0, 10, 10, 0.4)]
        with pytest.raises(ContractViolation):
            synth.gen_scene(world, layout, 4, 4, world.categories[0].name)
