"""Bezier-curve CDF representation.

A safe-distance CDF is represented by 10 non-decreasing control points in
[0, 1] over a distance domain [0, d_max].  Evaluation uses de Casteljau,
fitting is monotone-constrained least squares in the Bernstein basis, and
inversion is bisection on the monotone curve.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .errors import ContractViolation, DomainError, FormatError

log = logging.getLogger(__name__)

NUM_CONTROL_POINTS = 10
NUM_BINS = 100
DEFAULT_D_MAX = 2.0

_MONOTONE_TOL = 1e-9
_BISECTION_CAP = 200


@dataclass(frozen=True)
class BezierCurve:
    """Monotone degree-9 Bezier curve on t in [0, 1], t = d / d_max."""

    control_points: np.ndarray
    d_max: float = DEFAULT_D_MAX

    def __post_init__(self):
        cp = np.asarray(self.control_points, dtype=float)
        object.__setattr__(self, "control_points", cp)
        if cp.shape != (NUM_CONTROL_POINTS,):
            raise ContractViolation(f"expected {NUM_CONTROL_POINTS} control points, got shape {cp.shape}")
        if np.any(cp < -_MONOTONE_TOL) or np.any(cp > 1 + _MONOTONE_TOL):
            raise ContractViolation("control points must lie in [0, 1]")
        if np.any(np.diff(cp) < -_MONOTONE_TOL):
            raise ContractViolation("control points must be non-decreasing")
        if not (math.isfinite(self.d_max) and self.d_max > 0):
            raise ContractViolation(f"d_max must be positive, got {self.d_max}")


@dataclass(frozen=True)
class EmpiricalCdf:
    """Discrete CDF on 100 bins: values[i] is the CDF at bin_edges[i + 1]."""

    bin_edges: np.ndarray  # (101,) meters, ascending
    values: np.ndarray     # (100,) in [0, 1], non-decreasing

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "values", vals)
        if edges.shape != (NUM_BINS + 1,) or vals.shape != (NUM_BINS,):
            raise ContractViolation("expected 101 bin edges and 100 values")
        if np.any(np.diff(edges) <= 0):
            raise ContractViolation("bin edges must be strictly ascending")
        if np.any(np.diff(vals) < -_MONOTONE_TOL):
            raise ContractViolation("CDF values must be non-decreasing")

    @property
    def is_empty(self) -> bool:
        return float(self.values[-1]) == 0.0


def evaluate(curve: BezierCurve, t):
    """Evaluate the curve at parameter t in [0, 1] by de Casteljau."""
    tt = np.asarray(t, dtype=float)
    if np.any(tt < 0) or np.any(tt > 1):
        raise DomainError("t must lie in [0, 1]")
    flat = np.atleast_1d(tt)
    n = NUM_CONTROL_POINTS
    pts = np.broadcast_to(curve.control_points, (flat.size, n)).copy()
    s = flat[:, None]
    for r in range(1, n):
        pts[:, : n - r] = (1.0 - s) * pts[:, : n - r] + s * pts[:, 1 : n - r + 1]
    out = pts[:, 0]
    return float(out[0]) if tt.ndim == 0 else out.reshape(tt.shape)


def evaluate_at_distance(curve: BezierCurve, d):
    """Evaluate at a distance in meters; distances beyond d_max clamp to the endpoint."""
    dd = np.asarray(d, dtype=float)
    if np.any(dd < 0):
        raise DomainError("distance must be non-negative")
    return evaluate(curve, np.clip(dd / curve.d_max, 0.0, 1.0))


def bernstein_matrix(t: np.ndarray) -> np.ndarray:
    """Design matrix of degree-9 Bernstein polynomials at sample parameters t."""
    t = np.asarray(t, dtype=float)[:, None]
    i = np.arange(NUM_CONTROL_POINTS)[None, :]
    binom = np.array([math.comb(NUM_CONTROL_POINTS - 1, j) for j in range(NUM_CONTROL_POINTS)])
    return binom * t**i * (1.0 - t) ** (NUM_CONTROL_POINTS - 1 - i)


def isotonic_projection(x: np.ndarray) -> np.ndarray:
    """L2 projection onto non-decreasing sequences (pool adjacent violators)."""
    values = list(map(float, x))
    levels: list[tuple[float, int]] = []  # (mean, count)
    for v in values:
        mean, count = v, 1
        while levels and levels[-1][0] > mean:
            pm, pc = levels.pop()
            mean = (pm * pc + mean * count) / (pc + count)
            count += pc
        levels.append((mean, count))
    out = np.empty(len(values))
    pos = 0
    for mean, count in levels:
        out[pos : pos + count] = mean
        pos += count
    return out


def fit_to_cdf(cdf: EmpiricalCdf, d_max: float = DEFAULT_D_MAX) -> tuple[BezierCurve, float]:
    """Fit a monotone Bezier curve to an empirical CDF.

    Least squares in the Bernstein basis with the control points constrained
    to be non-decreasing (solved as non-negative increments), clamped to
    [0, 1]; the final control point is pinned to the CDF's terminal value.
    Returns the curve and its RMSE over the samples.

    The monotone constraint is enforced inside the solve rather than by
    projecting an unconstrained solution afterwards: for steep CDFs the
    unconstrained Bernstein solution rings with huge alternating
    coefficients, and projecting that saturates the control points into a
    0/1 step at an arbitrary knot.
    """
    if cdf.is_empty:
        log.warning("fitting an empty CDF; returning the all-zero curve")
        return BezierCurve(np.zeros(NUM_CONTROL_POINTS), d_max), 0.0
    span = cdf.bin_edges[-1] - cdf.bin_edges[0]
    t = (cdf.bin_edges[1:] - cdf.bin_edges[0]) / span
    basis = bernstein_matrix(t)
    lower = np.tril(np.ones((NUM_CONTROL_POINTS, NUM_CONTROL_POINTS)))
    inc, _ = scipy.optimize.nnls(basis @ lower, cdf.values)
    cp = np.clip(lower @ inc, 0.0, 1.0)
    cp = np.minimum(cp, float(cdf.values[-1]))
    cp[-1] = float(cdf.values[-1])
    curve = BezierCurve(cp, d_max)
    rmse = float(np.sqrt(np.mean((basis @ cp - cdf.values) ** 2)))
    return curve, rmse


def inverse(curve: BezierCurve, y: float, tol: float = 1e-8) -> float:
    """Smallest t with evaluate(curve, t) >= y, by bisection; 1.0 if never reached."""
    if not tol > 0:
        raise DomainError("tol must be positive")
    if np.any(np.diff(curve.control_points) < -_MONOTONE_TOL):
        raise ContractViolation("inverse requires a monotone curve")
    if evaluate(curve, 0.0) >= y:
        return 0.0
    if evaluate(curve, 1.0) < y:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(_BISECTION_CAP):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if evaluate(curve, mid) >= y:
            hi = mid
        else:
            lo = mid
    return hi


def save_curve(curve: BezierCurve, path) -> None:
    """Plain-text record: one d_max line, one control-point line."""
    with open(path, "w") as f:
        f.write(f"d_max {curve.d_max!r}\n")
        f.write("control_points " + " ".join(repr(float(c)) for c in curve.control_points) + "\n")


def load_curve(path) -> BezierCurve:
    with open(path) as f:
        lines = [ln.split() for ln in f if ln.strip()]
    try:
        fields = {ln[0]: ln[1:] for ln in lines}
        d_max = float(fields["d_max"][0])
        cp = np.array([float(v) for v in fields["control_points"]])
    except (KeyError, IndexError, ValueError) as exc:
        raise FormatError(f"malformed curve file {path}: {exc}") from exc
    return BezierCurve(cp, d_max)
