"""Risk as a value signal: frame percentiles, trajectory scores, ranking, DTW."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ScoringError
from .field import RiskImage

DEFAULT_PERCENTILE = 75


@dataclass(frozen=True)
class FrameScore:
    frame: int
    p75: float
    valid_pixels: int


@dataclass(frozen=True)
class TrajectoryScore:
    traj_id: str
    mean_risk: float
    frame_count: int


def frame_percentile(risk: RiskImage, p: float = DEFAULT_PERCENTILE, frame: int = 0) -> FrameScore:
    """Nearest-rank percentile of the per-frame risk distribution over valid pixels."""
    vals = np.sort(risk.data[risk.valid])
    if vals.size == 0:
        raise ScoringError("frame has no valid pixels")
    rank = max(1, math.ceil(p / 100.0 * vals.size))
    return FrameScore(frame, float(vals[rank - 1]), int(vals.size))


def trajectory_score(frames, p: float = DEFAULT_PERCENTILE, traj_id: str = "") -> TrajectoryScore:
    """Mean of per-frame percentiles over the caller-chosen frame window."""
    frames = list(frames)
    if not frames:
        raise ScoringError("trajectory has no frames")
    scores = [frame_percentile(f, p, i).p75 for i, f in enumerate(frames)]
    return TrajectoryScore(traj_id, float(np.mean(scores)), len(frames))


def rank_trajectories(scores: list[TrajectoryScore]):
    """Ascending sort by mean risk (ties by id); returns (ordering, least, most)."""
    if not scores:
        raise ScoringError("no trajectory scores to rank")
    ordered = sorted(scores, key=lambda s: (s.mean_risk, s.traj_id))
    ordering = [s.traj_id for s in ordered]
    return ordering, ordering[0], ordering[-1]


def dtw_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Classic dynamic-time-warping distance with Euclidean point cost."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ScoringError("DTW needs non-empty sequences")
    n, m = a.shape[0], b.shape[0]
    cost = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            acc[i, j] = cost[i - 1, j - 1] + min(acc[i - 1, j], acc[i, j - 1], acc[i - 1, j - 1])
    return float(acc[n, m])
