"""Posterior assembly and dense per-pixel risk evaluation.

A posterior curve is viability as a function of distance for one context
(manipulated object string + matched scene category): the likelihood CDF
from the learned model times the distance-attenuated prior from the LUTs.
Dense evaluation walks a feature/distance image pixel by pixel, memoizing
curves per unique pixel feature.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import bezier, core, likelihood, prior
from .core import AttenuationConfig, DEFAULT_ATTENUATION
from .errors import ContractViolation, FormatError, SchemaError

GRID_POINTS = 100

_MAGICS = {"FIMG": b"FIMG", "DIMG": b"DIMG", "MIMG": b"MIMG", "RIMG": b"RIMG"}


@dataclass(frozen=True)
class FeatureImage:
    data: np.ndarray  # (H, W, D) float32

    def __post_init__(self):
        if self.data.ndim != 3 or not np.all(np.isfinite(self.data)):
            raise ContractViolation("feature image must be finite (H, W, D)")

    @property
    def shape(self):
        return self.data.shape[:2]

    @property
    def dim(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class DistanceImage:
    data: np.ndarray  # (H, W) meters; NaN marks invalid depth

    def __post_init__(self):
        if self.data.ndim != 2:
            raise ContractViolation("distance image must be (H, W)")
        valid = ~np.isnan(self.data)
        if np.any(self.data[valid] < 0):
            raise ContractViolation("valid distances must be non-negative")

    @property
    def valid(self) -> np.ndarray:
        return ~np.isnan(self.data)


@dataclass(frozen=True)
class RiskImage:
    data: np.ndarray  # (H, W) in [0, 1]; NaN marks invalid pixels
    reasons: np.ndarray | None = None  # (H, W) object array of reason strings

    def __post_init__(self):
        valid = ~np.isnan(self.data)
        if np.any(self.data[valid] < 0) or np.any(self.data[valid] > 1):
            raise ContractViolation("risk values must lie in [0, 1]")

    @property
    def valid(self) -> np.ndarray:
        return ~np.isnan(self.data)


@dataclass(frozen=True)
class PosteriorCurve:
    manip: str
    category: str
    rating: int
    reason: str
    grid: np.ndarray    # (100,) distances on [0, d_max]
    values: np.ndarray  # (100,) viability, non-decreasing

    def __post_init__(self):
        if np.any(np.diff(self.values) < -1e-9):
            raise ContractViolation("posterior viability must be non-decreasing in distance")

    @property
    def d_max(self) -> float:
        return float(self.grid[-1])


# ---------------------------------------------------------------------------
# Binary image files: magic, u32 dims, little-endian payload, row-major
# ---------------------------------------------------------------------------

def write_feature_image(img: FeatureImage, path) -> None:
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(_MAGICS["FIMG"])
        f.write(struct.pack("<III", h, w, img.dim))
        f.write(np.ascontiguousarray(img.data, dtype="<f4").tobytes())


def read_feature_image(path) -> FeatureImage:
    data = _read_payload(path, "FIMG", 3)
    h, w, d = data[0]
    arr = np.frombuffer(data[1], dtype="<f4", count=h * w * d).reshape(h, w, d)
    return FeatureImage(arr.astype(np.float32))


def write_distance_image(img: DistanceImage, path) -> None:
    h, w = img.data.shape
    with open(path, "wb") as f:
        f.write(_MAGICS["DIMG"])
        f.write(struct.pack("<II", h, w))
        f.write(np.ascontiguousarray(img.data, dtype="<f4").tobytes())


def read_distance_image(path) -> DistanceImage:
    data = _read_payload(path, "DIMG", 2)
    h, w = data[0]
    arr = np.frombuffer(data[1], dtype="<f4", count=h * w).reshape(h, w)
    return DistanceImage(arr.astype(np.float64))


def write_mask_image(masks: np.ndarray, path) -> None:
    h, w = masks.shape
    with open(path, "wb") as f:
        f.write(_MAGICS["MIMG"])
        f.write(struct.pack("<II", h, w))
        f.write(np.ascontiguousarray(masks, dtype="<u2").tobytes())


def read_mask_image(path) -> np.ndarray:
    data = _read_payload(path, "MIMG", 2)
    h, w = data[0]
    return np.frombuffer(data[1], dtype="<u2", count=h * w).reshape(h, w).copy()


def write_risk_image(img: RiskImage, path) -> None:
    h, w = img.data.shape
    with open(path, "wb") as f:
        f.write(_MAGICS["RIMG"])
        f.write(struct.pack("<II", h, w))
        f.write(np.ascontiguousarray(img.data, dtype="<f4").tobytes())


def read_risk_image(path) -> RiskImage:
    data = _read_payload(path, "RIMG", 2)
    h, w = data[0]
    arr = np.frombuffer(data[1], dtype="<f4", count=h * w).reshape(h, w)
    return RiskImage(arr.astype(np.float64))


def _read_payload(path, kind: str, ndims: int):
    with open(path, "rb") as f:
        blob = f.read()
    magic = _MAGICS[kind]
    if blob[:4] != magic:
        raise FormatError(f"{path}: bad magic, expected {kind}")
    dims = struct.unpack(f"<{ndims}I", blob[4 : 4 + 4 * ndims])
    itemsize = 2 if kind == "MIMG" else 4
    need = 4 + 4 * ndims + int(np.prod(dims)) * itemsize
    if len(blob) < need:
        raise FormatError(f"{path}: truncated {kind} payload")
    return dims, blob[4 + 4 * ndims :]


# ---------------------------------------------------------------------------
# Posterior curves and dense evaluation
# ---------------------------------------------------------------------------

def posterior_curve(model: likelihood.LikelihoodModel, object_lut: prior.ObjectLUT,
                    risk_lut: prior.RiskLUT, manip_string: str,
                    manip_feat: np.ndarray, scene_feat: np.ndarray,
                    cfg: AttenuationConfig = DEFAULT_ATTENUATION,
                    d_max: float = bezier.DEFAULT_D_MAX) -> PosteriorCurve:
    """v(d) = likelihood CDF(d) * attenuated prior(d) on a 100-point grid."""
    cps = likelihood.forward(model, manip_feat, scene_feat)
    curve = bezier.BezierCurve(cps, d_max)
    grid = np.linspace(0.0, d_max, GRID_POINTS)
    lik = bezier.evaluate_at_distance(curve, grid)
    category, _ = prior.match_category(object_lut, scene_feat)
    rating, reason = prior.lookup_rating(risk_lut, manip_string, category)
    p_safe = prior.rating_to_prob(rating)
    values = core.compose_viability(lik, core.attenuate_prior(p_safe, grid, cfg))
    return PosteriorCurve(manip_string, category, rating, reason, grid, values)


def risk_at(curve: PosteriorCurve, d):
    """1 - viability, linearly interpolated on the grid; clamped beyond it."""
    v = np.interp(np.asarray(d, dtype=float), curve.grid, curve.values)
    out = core.risk_from_viability(v)
    return float(out) if np.ndim(d) == 0 else out


def risk_image(model: likelihood.LikelihoodModel, object_lut: prior.ObjectLUT,
               risk_lut: prior.RiskLUT, manip_string: str, manip_feat: np.ndarray,
               feat_img: FeatureImage, dist_img: DistanceImage,
               cfg: AttenuationConfig = DEFAULT_ATTENUATION,
               d_max: float = bezier.DEFAULT_D_MAX) -> RiskImage:
    """Per-pixel risk; posterior curves memoized per unique pixel feature."""
    if feat_img.shape != dist_img.data.shape:
        raise SchemaError(f"feature image {feat_img.shape} vs distance image {dist_img.data.shape}")
    h, w = feat_img.shape
    out = np.full((h, w), np.nan)
    reasons = np.full((h, w), None, dtype=object)
    memo: dict[bytes, PosteriorCurve] = {}
    valid = dist_img.valid
    for r in range(h):
        for c in range(w):
            if not valid[r, c]:
                continue
            feat = feat_img.data[r, c].astype(float)
            key = feat.tobytes()
            curve = memo.get(key)
            if curve is None:
                curve = posterior_curve(model, object_lut, risk_lut, manip_string,
                                        manip_feat, feat, cfg, d_max)
                memo[key] = curve
            out[r, c] = risk_at(curve, float(dist_img.data[r, c]))
            reasons[r, c] = curve.reason
    return RiskImage(out, reasons)


def average_over_masks(risk: RiskImage, masks: np.ndarray) -> RiskImage:
    """Replace each labeled region (label > 0) by its mean risk over valid pixels."""
    if masks.shape != risk.data.shape:
        raise SchemaError("mask shape mismatch")
    out = risk.data.copy()
    for label in np.unique(masks):
        if label == 0:
            continue
        sel = (masks == label) & risk.valid
        if np.any(sel):
            out[sel] = out[sel].mean()
    return RiskImage(out, risk.reasons)


def region_means(risk: RiskImage, masks: np.ndarray) -> dict[int, float]:
    means = {}
    for label in np.unique(masks):
        if label == 0:
            continue
        sel = (masks == label) & risk.valid
        if np.any(sel):
            means[int(label)] = float(risk.data[sel].mean())
    return means


# Polynomial approximation of the turbo colormap (degree 5 per channel).
_TURBO_R = (0.13572138, 4.61539260, -42.66032258, 132.13108234, -152.94239396, 59.28637943)
_TURBO_G = (0.09140261, 2.19418839, 4.84296658, -14.18503333, 4.27729857, 2.82956604)
_TURBO_B = (0.10667330, 12.64194608, -60.58204836, 110.36276771, -89.90310912, 27.34824973)


def turbo_rgb(x) -> np.ndarray:
    """Map values in [0, 1] to turbo RGB triplets in [0, 1]."""
    t = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    chans = [np.polyval(list(reversed(coef)), t) for coef in (_TURBO_R, _TURBO_G, _TURBO_B)]
    return np.clip(np.stack(chans, axis=-1), 0.0, 1.0)


def render_turbo(risk: RiskImage, path) -> None:
    """Write a binary PPM (P6): risk 0 -> purple-blue, 1 -> red; invalid pixels black."""
    h, w = risk.data.shape
    rgb = np.zeros((h, w, 3), dtype=np.uint8)
    valid = risk.valid
    rgb[valid] = np.round(turbo_rgb(risk.data[valid]) * 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode())
        f.write(rgb.tobytes())
