"""Synthetic oracle world for end-to-end validation.

Generates well-separated Gaussian feature clusters per category, a random
symmetric risk table, safe demonstration logs whose clearance statistics
encode the ratings (riskier pairs keep larger distances), and labeled
scenes in the exact file formats the rest of the pipeline consumes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .demos import DemoRecord, write_demo_log
from .errors import ContractViolation, DomainError
from .field import DistanceImage, FeatureImage
from .prior import RiskLUT

SEPARATION_FACTOR = 6.0
DEFAULT_INTRA_STD = 0.05
BASE_SAFE_DISTANCE = 0.15   # meters, mean clearance for a rating-5 pair
DISTANCE_PER_RATING = 0.25  # extra mean clearance per rating step below 5
DISTANCE_STD = 0.05


@dataclass(frozen=True)
class SynthCategory:
    name: str
    mean: np.ndarray
    std: float


@dataclass(frozen=True)
class SynthWorld:
    categories: list[SynthCategory]
    ratings: RiskLUT
    seed: int

    def category(self, name: str) -> SynthCategory:
        for c in self.categories:
            if c.name == name:
                return c
        raise KeyError(name)


def mean_distance_for_rating(rating: int) -> float:
    """Demonstrated clearance grows linearly as the rating drops toward unsafe."""
    return BASE_SAFE_DISTANCE + DISTANCE_PER_RATING * (5 - rating)


def gen_world(n_categories: int, feature_dim: int, seed: int = 0,
              intra_std: float = DEFAULT_INTRA_STD) -> SynthWorld:
    """Well-separated Gaussian cluster means plus random symmetric 1..5 ratings."""
    if n_categories < 2:
        raise DomainError("need at least two categories")
    rng = np.random.default_rng(seed)
    means = rng.normal(size=(n_categories, feature_dim))
    # Scale so every pair of means is at least 6x the intra-cluster std apart.
    d = np.linalg.norm(means[:, None] - means[None, :], axis=-1)
    min_sep = d[np.triu_indices(n_categories, 1)].min()
    required = SEPARATION_FACTOR * intra_std
    if min_sep < required:
        means *= 1.5 * required / min_sep
    names = [f"obj{i:02d}" for i in range(n_categories)]
    cats = [SynthCategory(n, means[i], intra_std) for i, n in enumerate(names)]
    ratings = RiskLUT()
    for a, b in itertools.combinations(names, 2):
        ratings.entries[(a, b)] = (int(rng.integers(1, 6)), "synthetic")
    world = SynthWorld(cats, ratings, seed)
    _check_separation(world)
    return world


def _check_separation(world: SynthWorld) -> None:
    max_std = max(c.std for c in world.categories)
    for a, b in itertools.combinations(world.categories, 2):
        if np.linalg.norm(a.mean - b.mean) < SEPARATION_FACTOR * max_std:
            raise ContractViolation(f"categories {a.name}/{b.name} violate the separation guarantee")


def sample_features(cat: SynthCategory, n: int, rng: np.random.Generator) -> np.ndarray:
    return cat.mean + rng.normal(scale=cat.std, size=(n, cat.mean.size))


def _truncated_distances(mu: float, n: int, rng: np.random.Generator) -> np.ndarray:
    d = rng.normal(mu, DISTANCE_STD, size=n)
    while np.any(d < 0):
        bad = d < 0
        d[bad] = rng.normal(mu, DISTANCE_STD, size=bad.sum())
    return d


def gen_demo_records(world: SynthWorld, n_traj_per_pair: int, frames_per_traj: int,
                     seed: int = 0) -> list[DemoRecord]:
    rng = np.random.default_rng(seed)
    records: list[DemoRecord] = []
    for a, b in itertools.combinations([c.name for c in world.categories], 2):
        rating, _ = world.ratings.entries[(a, b)]
        mu = mean_distance_for_rating(rating)
        cat_a, cat_b = world.category(a), world.category(b)
        for t in range(n_traj_per_pair):
            traj_id = f"{a}-{b}-{t:02d}"
            dists = _truncated_distances(mu, frames_per_traj, rng)
            m_feats = sample_features(cat_a, frames_per_traj, rng)
            o_feats = sample_features(cat_b, frames_per_traj, rng)
            for f in range(frames_per_traj):
                records.append(DemoRecord(traj_id, f, float(dists[f]), m_feats[f], o_feats[f]))
    return records


def gen_demos(world: SynthWorld, n_traj_per_pair: int, frames_per_traj: int,
              path, seed: int = 0) -> None:
    """Write a demo log file; byte-identical under a fixed seed."""
    write_demo_log(gen_demo_records(world, n_traj_per_pair, frames_per_traj, seed), path)


@dataclass(frozen=True)
class Region:
    category: str
    top: int
    left: int
    height: int
    width: int
    distance: float


@dataclass(frozen=True)
class SceneData:
    features: FeatureImage
    distances: DistanceImage
    masks: np.ndarray                       # (H, W) u16 labels, 0 = background
    regions: dict[int, tuple[str, int]]     # label -> (category, rating vs manip)


def shelf_layout(categories: list[str], h: int, w: int, distance: float = 0.5) -> list[Region]:
    """Vertical strips, one per category, with one-pixel margins."""
    strip = w // len(categories)
    return [
        Region(cat, 1, i * strip + 1, h - 2, strip - 2, distance)
        for i, cat in enumerate(categories)
    ]


def gen_scene(world: SynthWorld, layout: list[Region], h: int, w: int,
              manip_category: str, seed: int = 0) -> SceneData:
    """Fill layout regions with cluster-sampled features, distances, and labels."""
    rng = np.random.default_rng(seed)
    feats = np.zeros((h, w, world.categories[0].mean.size), dtype=np.float32)
    dists = np.full((h, w), np.nan)
    masks = np.zeros((h, w), dtype=np.uint16)
    regions: dict[int, tuple[str, int]] = {}
    for label, reg in enumerate(layout, start=1):
        if reg.top < 0 or reg.left < 0 or reg.top + reg.height > h or reg.left + reg.width > w:
            raise ContractViolation(f"region {reg} does not fit in {h}x{w}")
        sel = masks[reg.top : reg.top + reg.height, reg.left : reg.left + reg.width]
        if np.any(sel != 0):
            raise ContractViolation(f"region {reg} overlaps a previous region")
        sel[:] = label
        cat = world.category(reg.category)
        n = reg.height * reg.width
        feats[reg.top : reg.top + reg.height, reg.left : reg.left + reg.width] = (
            sample_features(cat, n, rng).reshape(reg.height, reg.width, -1)
        )
        dists[reg.top : reg.top + reg.height, reg.left : reg.left + reg.width] = reg.distance
        if reg.category == manip_category:
            rating = 5  # an object poses no clearance risk to itself here
        else:
            rating, _ = world.ratings.entries[
                tuple(sorted((manip_category, reg.category)))
            ]
        regions[label] = (reg.category, rating)
    return SceneData(FeatureImage(feats), DistanceImage(dists), masks, regions)


def object_samples(world: SynthWorld, per_category: int, seed: int = 0) -> dict[str, np.ndarray]:
    """Feature samples per category, for building an object LUT."""
    rng = np.random.default_rng(seed)
    return {c.name: sample_features(c, per_category, rng) for c in world.categories}
