"""Shared fixtures: two synthetic worlds with trained likelihood models.

Training is the expensive part of the suite, so both models are built once
per session and reused by the unit and acceptance tests.
"""

import itertools

import numpy as np
import pytest

from bayesrisk import demos, likelihood, prior, synth

TRAIN_CFG = dict(learning_rate=0.1, momentum=0.9, epochs=40, batch_size=64, seed=4)


def _train_world(n_categories: int, world_seed: int):
    world = synth.gen_world(n_categories, 32, seed=world_seed)
    records = synth.gen_demo_records(world, 5, 25, seed=1)
    groups = demos.group_by_trajectory(records)
    examples = demos.make_training_set(groups, seed=2)
    model = likelihood.init_model(32, width=64, layers=2, seed=3)
    model, history = likelihood.train(model, examples, likelihood.TrainingConfig(**TRAIN_CFG))
    return world, records, examples, model, history


@pytest.fixture(scope="session")
def trained_world5():
    """5-category world + trained model (used by the learning acceptance run)."""
    return _train_world(5, world_seed=0)


@pytest.fixture(scope="session")
def trained_world6():
    """6-category world whose five (manip, other) ratings are all distinct.

    World seed 4 gives ratings {obj01: 1, obj02: 3, obj03: 5, obj04: 4,
    obj05: 2} against obj00, so region orderings have no ties.
    """
    world, records, examples, model, history = _train_world(6, world_seed=4)
    manip = world.categories[0].name
    ratings = [
        world.ratings.entries[tuple(sorted((manip, c.name)))][0]
        for c in world.categories[1:]
    ]
    assert len(set(ratings)) == 5
    return world, model, manip


@pytest.fixture(scope="session")
def object_lut6(trained_world6):
    world, _, _ = trained_world6
    samples = synth.object_samples(world, 40, seed=5)
    return prior.build_object_lut(samples, k=5, seed=6)


def rated_pair_curves(world, curves_by_pair, tol=5e-3):
    """Count rated pair-vs-pair comparisons whose CDFs respect stochastic order.

    A comparison passes when the riskier pair's CDF stays below the safer
    pair's (within tol) on at least 90% of the evaluation grid.
    """
    ok = total = 0
    for p1, p2 in itertools.combinations(curves_by_pair, 2):
        r1 = world.ratings.entries[p1][0]
        r2 = world.ratings.entries[p2][0]
        if r1 == r2:
            continue
        low, high = (p1, p2) if r1 < r2 else (p2, p1)
        total += 1
        frac = np.mean(curves_by_pair[low] <= curves_by_pair[high] + tol)
        if frac >= 0.9:
            ok += 1
    return ok, total
