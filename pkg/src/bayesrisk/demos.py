"""Demonstration log ingestion and conversion into training targets.

A demo log is line-delimited text: a `#dim D` header, then one record per
line, `traj_id frame distance m_feat[0..D-1] o_feat[0..D-1]`.  Each
trajectory yields a 100-bin distance histogram, an empirical CDF, a fitted
Bezier target, and up to 100 sampled feature-pair training examples.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import bezier
from .bezier import NUM_BINS, BezierCurve, EmpiricalCdf
from .errors import ContractViolation, DatasetError, FormatError, SchemaError

log = logging.getLogger(__name__)

PAIRS_PER_TRAJECTORY = 100


@dataclass(frozen=True)
class DemoRecord:
    traj_id: str
    frame: int
    distance: float
    m_feat: np.ndarray  # manipulated-object feature for this frame
    o_feat: np.ndarray  # central-object feature for this frame


@dataclass(frozen=True)
class TrajectoryHistogram:
    traj_id: str
    counts: np.ndarray  # (100,) non-negative ints
    d_max: float

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class TrainingExample:
    feat_a: np.ndarray
    feat_b: np.ndarray
    target: np.ndarray  # (10,) fitted Bezier control points
    traj_id: str = ""


def ingest_demo_log(path) -> list[DemoRecord]:
    """Parse a demo log; records come back grouped by trajectory, frames ascending."""
    records: list[DemoRecord] = []
    dim = None
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if parts and parts[0] == "dim":
                    dim = int(parts[1])
                continue
            if dim is None:
                raise FormatError(f"{path}:{lineno}: record before '#dim D' header")
            parts = line.split()
            if len(parts) != 3 + 2 * dim:
                raise SchemaError(
                    f"{path}:{lineno}: expected {3 + 2 * dim} fields for dim {dim}, got {len(parts)}"
                )
            try:
                traj_id = parts[0]
                frame = int(parts[1])
                distance = float(parts[2])
                feats = np.array([float(v) for v in parts[3:]])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
            if frame < 0 or not np.isfinite(distance) or distance < 0:
                raise FormatError(f"{path}:{lineno}: bad frame or distance")
            records.append(DemoRecord(traj_id, frame, distance, feats[:dim], feats[dim:]))
    records.sort(key=lambda r: (r.traj_id, r.frame))
    return records


def write_demo_log(records: list[DemoRecord], path) -> None:
    if records:
        dim = records[0].m_feat.size
    else:
        dim = 0
    with open(path, "w") as f:
        f.write(f"#dim {dim}\n")
        for r in records:
            feats = " ".join(repr(float(v)) for v in np.concatenate([r.m_feat, r.o_feat]))
            f.write(f"{r.traj_id} {r.frame} {r.distance!r} {feats}\n")


def group_by_trajectory(records: list[DemoRecord]) -> dict[str, list[DemoRecord]]:
    groups: dict[str, list[DemoRecord]] = {}
    for r in records:
        groups.setdefault(r.traj_id, []).append(r)
    for recs in groups.values():
        recs.sort(key=lambda r: r.frame)
    return groups


def build_histogram(records: list[DemoRecord], d_max: float = bezier.DEFAULT_D_MAX) -> TrajectoryHistogram:
    """100 equal-width bins on [0, d_max]; out-of-range distances land in the last bin."""
    if not records:
        raise ContractViolation("cannot build a histogram from zero records")
    traj_ids = {r.traj_id for r in records}
    if len(traj_ids) != 1:
        raise ContractViolation(f"records span multiple trajectories: {sorted(traj_ids)}")
    dists = np.array([r.distance for r in records])
    idx = np.minimum((dists / d_max * NUM_BINS).astype(int), NUM_BINS - 1)
    counts = np.bincount(idx, minlength=NUM_BINS)
    return TrajectoryHistogram(records[0].traj_id, counts, d_max)


def cdf_from_histogram(h: TrajectoryHistogram) -> EmpiricalCdf:
    edges = np.linspace(0.0, h.d_max, NUM_BINS + 1)
    total = h.total
    if total == 0:
        return EmpiricalCdf(edges, np.zeros(NUM_BINS))
    return EmpiricalCdf(edges, np.cumsum(h.counts) / total)


def fit_trajectory_curve(records: list[DemoRecord], d_max: float) -> BezierCurve:
    cdf = cdf_from_histogram(build_histogram(records, d_max))
    curve, _ = bezier.fit_to_cdf(cdf, d_max)
    return curve


def make_training_set(
    trajectories: dict[str, list[DemoRecord]],
    d_max: float = bezier.DEFAULT_D_MAX,
    pairs_per_traj: int = PAIRS_PER_TRAJECTORY,
    seed: int = 0,
) -> list[TrainingExample]:
    """Sample min(pairs_per_traj, L^2) distinct feature pairs per trajectory.

    The pair pool is (m-feature of frame i, o-feature of frame j) over all
    i, j; each sampled pair carries the trajectory's fitted Bezier target.
    Deterministic under the seed.
    """
    if not trajectories:
        raise DatasetError("no trajectories to sample from")
    rng = np.random.default_rng(seed)
    examples: list[TrainingExample] = []
    for traj_id in sorted(trajectories):
        recs = trajectories[traj_id]
        if not recs:
            log.warning("trajectory %s has no frames; skipped", traj_id)
            continue
        target = fit_trajectory_curve(recs, d_max).control_points
        length = len(recs)
        pool = length * length
        k = min(pairs_per_traj, pool)
        chosen = rng.choice(pool, size=k, replace=False)
        for flat in chosen:
            i, j = divmod(int(flat), length)
            examples.append(TrainingExample(recs[i].m_feat, recs[j].o_feat, target, traj_id))
    if not examples:
        raise DatasetError("every trajectory was empty")
    return examples
