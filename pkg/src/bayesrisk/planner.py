"""Risk-aware planning around a union of balls.

Each scene point carries a posterior viability curve; the distance at which
viability first reaches the threshold alpha becomes the point's buffer
radius.  The inflated point cloud is voxel-downsampled into ball obstacles,
and paths are found with A* on a 26-connected lattice followed by greedy
shortcutting and Chaikin smoothing with clearance re-validation.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, DomainError, InfeasibleInputError, PlanningError
from .field import PosteriorCurve

DEFAULT_ALPHA = 0.1
DEFAULT_RESOLUTION = 0.02
_RADIUS_TOL = 1e-6


@dataclass(frozen=True)
class BallObstacle:
    center: np.ndarray  # (3,) meters
    radius: float
    context: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.radius) and self.radius >= 0):
            raise ContractViolation(f"radius must be finite and non-negative, got {self.radius}")


@dataclass(frozen=True)
class Path:
    waypoints: np.ndarray  # (N, 3), N >= 2; first = start, last = goal

    def __post_init__(self):
        if self.waypoints.ndim != 2 or self.waypoints.shape[0] < 2 or self.waypoints.shape[1] != 3:
            raise ContractViolation("a path needs at least two 3D waypoints")

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.diff(self.waypoints, axis=0), axis=1).sum())


@dataclass(frozen=True)
class PlannerConfig:
    resolution: float = DEFAULT_RESOLUTION
    bounds_min: tuple[float, float, float] = (-1.0, -1.0, -1.0)
    bounds_max: tuple[float, float, float] = (1.0, 1.0, 1.0)
    smoothing_iters: int = 2


def extract_radius(curve: PosteriorCurve, alpha: float = DEFAULT_ALPHA) -> float:
    """Smallest distance with viability >= alpha; d_max if never reached.

    The crossing is bracketed on the curve grid and refined by bisection on
    the linearly interpolated viability.
    """
    v = curve.values
    if np.any(np.diff(v) < -1e-9):
        raise ContractViolation("extract_radius requires a monotone posterior curve")
    if v[0] >= alpha:
        return 0.0
    if v[-1] < alpha:
        return curve.d_max
    idx = int(np.searchsorted(v, alpha, side="left"))
    lo, hi = float(curve.grid[idx - 1]), float(curve.grid[idx])
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if np.interp(mid, curve.grid, v) >= alpha:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-9:
            break
    return hi


def inflate_point_cloud(points, alpha: float = DEFAULT_ALPHA,
                        voxel: float = 0.05) -> list[BallObstacle]:
    """Voxel-downsample (point, curve) pairs into balls, keeping the max radius per voxel."""
    if voxel <= 0:
        raise DomainError("voxel size must be positive")
    cells: dict[tuple[int, int, int], tuple[np.ndarray, float, str]] = {}
    for point, curve in points:
        p = np.asarray(point, dtype=float)
        r = extract_radius(curve, alpha)
        key = tuple(np.floor(p / voxel).astype(int))
        kept = cells.get(key)
        if kept is None or r > kept[1]:
            cells[key] = (p, r, f"{curve.manip}/{curve.category}")
    return [BallObstacle(p, r, ctx) for p, r, ctx in (cells[k] for k in sorted(cells))]


def _obstacle_arrays(obstacles):
    if not obstacles:
        return np.zeros((0, 3)), np.zeros(0)
    return np.array([o.center for o in obstacles]), np.array([o.radius for o in obstacles])


def _min_clearance_point(p: np.ndarray, obstacles) -> float:
    centers, radii = obstacles if isinstance(obstacles, tuple) else _obstacle_arrays(obstacles)
    if len(radii) == 0:
        return math.inf
    return float(np.min(np.linalg.norm(centers - p, axis=1) - radii))


def _segment_samples(a: np.ndarray, b: np.ndarray, step: float) -> np.ndarray:
    n = max(2, int(math.ceil(np.linalg.norm(b - a) / step)) + 1)
    t = np.linspace(0.0, 1.0, n)[:, None]
    return a[None] * (1 - t) + b[None] * t


def _segment_clearance(a, b, obstacles, step) -> float:
    centers, radii = obstacles if isinstance(obstacles, tuple) else _obstacle_arrays(obstacles)
    if len(radii) == 0:
        return math.inf
    pts = _segment_samples(a, b, step)
    d = np.linalg.norm(pts[:, None, :] - centers[None, :, :], axis=2) - radii[None, :]
    return float(d.min())


def path_clearance(path: Path, obstacles, step: float = DEFAULT_RESOLUTION / 2) -> float:
    """Minimum signed clearance over dense samples; +inf with no obstacles."""
    arrs = obstacles if isinstance(obstacles, tuple) else _obstacle_arrays(obstacles)
    if len(arrs[1]) == 0:
        return math.inf
    wp = path.waypoints
    return min(_segment_clearance(wp[i], wp[i + 1], arrs, step) for i in range(len(wp) - 1))


_MOVES = [np.array(m) for m in itertools.product((-1, 0, 1), repeat=3) if any(m)]


def _astar(start_cell, goal_cell, is_free, goal_point, res) -> list[tuple[int, int, int]]:
    costs = {tuple(m): float(np.linalg.norm(m)) * res for m in _MOVES}
    open_heap = [(0.0, 0, start_cell)]
    g = {start_cell: 0.0}
    came: dict[tuple, tuple] = {}
    counter = itertools.count(1)
    closed = set()
    while open_heap:
        _, _, cell = heapq.heappop(open_heap)
        if cell in closed:
            continue
        closed.add(cell)
        if cell == goal_cell:
            out = [cell]
            while cell in came:
                cell = came[cell]
                out.append(cell)
            return out[::-1]
        base = g[cell]
        for m in _MOVES:
            nxt = (cell[0] + m[0], cell[1] + m[1], cell[2] + m[2])
            if nxt in closed or not is_free(nxt):
                continue
            tentative = base + costs[tuple(m)]
            if tentative < g.get(nxt, math.inf):
                g[nxt] = tentative
                came[nxt] = cell
                h = float(np.linalg.norm(np.array(nxt) * res - goal_point))
                heapq.heappush(open_heap, (tentative + h, next(counter), nxt))
    raise PlanningError("no lattice path between start and goal")


def plan(start, goal, obstacles: list[BallObstacle], cfg: PlannerConfig = PlannerConfig()) -> Path:
    """Shortest lattice path around the ball union, shortcut and smoothed.

    Deterministic for identical inputs.  Shortcut segments are only accepted
    if they keep at least the pre-shortcut minimum clearance; a smoothing
    iteration is reverted if it drives the sampled clearance negative.
    """
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    lo = np.asarray(cfg.bounds_min)
    hi = np.asarray(cfg.bounds_max)
    arrs = _obstacle_arrays(obstacles)
    for name, p in (("start", start), ("goal", goal)):
        if np.any(p < lo) or np.any(p > hi):
            raise InfeasibleInputError(f"{name} outside workspace bounds")
        if _min_clearance_point(p, arrs) < 0:
            raise InfeasibleInputError(f"{name} lies inside an obstacle ball")

    res = cfg.resolution
    step = res / 2.0
    lo_cell = tuple(int(math.ceil(v / res)) for v in lo)
    hi_cell = tuple(int(math.floor(v / res)) for v in hi)

    def is_free(cell) -> bool:
        if any(c < l or c > h for c, l, h in zip(cell, lo_cell, hi_cell)):
            return False
        return _min_clearance_point(np.array(cell) * res, arrs) > 0

    def nearest_free_cell(p: np.ndarray):
        base = tuple(int(round(v / res)) for v in p)
        best = None
        for radius in range(0, 5):
            candidates = []
            for off in itertools.product(range(-radius, radius + 1), repeat=3):
                cell = (base[0] + off[0], base[1] + off[1], base[2] + off[2])
                if is_free(cell):
                    candidates.append((float(np.linalg.norm(np.array(cell) * res - p)), cell))
            if candidates:
                best = min(candidates)[1]
                break
        if best is None:
            raise PlanningError("no free lattice cell near start/goal")
        return best

    cells = _astar(nearest_free_cell(start), nearest_free_cell(goal), is_free, goal, res)
    waypoints = [start] + [np.array(c) * res for c in cells] + [goal]
    raw = Path(np.array(waypoints))

    # Greedy shortcutting: never drop below the pre-shortcut minimum clearance.
    floor_clear = path_clearance(raw, arrs, step)
    wp = list(raw.waypoints)
    shortcut = [wp[0]]
    i = 0
    while i < len(wp) - 1:
        j = len(wp) - 1
        while j > i + 1 and _segment_clearance(wp[i], wp[j], arrs, step) < floor_clear:
            j -= 1
        shortcut.append(wp[j])
        i = j
    current = np.array(shortcut)

    # Chaikin corner cutting with endpoints fixed; revert if clearance goes negative.
    for _ in range(cfg.smoothing_iters):
        if len(current) < 3:
            break
        pts = [current[0]]
        for a, b in zip(current[:-1], current[1:]):
            pts.append(0.75 * a + 0.25 * b)
            pts.append(0.25 * a + 0.75 * b)
        pts.append(current[-1])
        candidate = np.array(pts)
        if path_clearance(Path(candidate), arrs, step) >= 0:
            current = candidate
        else:
            break
    return Path(current)


def save_obstacles(obstacles: list[BallObstacle], path) -> None:
    with open(path, "w") as f:
        for o in obstacles:
            x, y, z = (float(v) for v in o.center)
            f.write(f"{x!r} {y!r} {z!r} {float(o.radius)!r}\n")


def load_obstacles(path) -> list[BallObstacle]:
    out = []
    with open(path) as f:
        for line in f:
            if line.strip():
                x, y, z, r = (float(v) for v in line.split())
                out.append(BallObstacle(np.array([x, y, z]), r))
    return out


def save_path(path_obj: Path, path) -> None:
    with open(path, "w") as f:
        for p in path_obj.waypoints:
            f.write(f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}\n")


def load_path(path) -> Path:
    pts = []
    with open(path) as f:
        for line in f:
            if line.strip():
                pts.append([float(v) for v in line.split()])
    return Path(np.array(pts))
