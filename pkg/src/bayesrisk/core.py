"""Composition of safety probabilities into viability and risk.

Viability for a context is the product of a distance-CDF likelihood and a
distance-attenuated semantic prior; risk is its complement.  Everything in
this module is a pure function over probabilities in [0, 1] and accepts
scalars or numpy arrays interchangeably.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

# Probabilities are clamped back into [0, 1] after arithmetic; anything
# further out than this is a genuine domain violation, not rounding drift.
CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class AttenuationConfig:
    """Rate (1/meters) at which an unsafe prior relaxes toward 1 with distance."""

    lam: float = 0.5

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise DomainError(f"attenuation rate must be finite and positive, got {self.lam}")


DEFAULT_ATTENUATION = AttenuationConfig()


def _as_unit(x, name: str):
    """Validate x (scalar or array) as a probability, clamping rounding drift."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    if np.any(arr < -CLAMP_TOL) or np.any(arr > 1.0 + CLAMP_TOL):
        raise DomainError(f"{name} must lie in [0, 1]")
    return np.clip(arr, 0.0, 1.0)


def _match_shape(out: np.ndarray, *inputs):
    if all(np.ndim(v) == 0 for v in inputs):
        return float(out)
    return out


def attenuate_prior(p_safe, d, cfg: AttenuationConfig = DEFAULT_ATTENUATION):
    """Relax a safety prior toward 1 as the inter-object distance grows.

    Returns 1 - exp(-lam * d) * (1 - p_safe).  Equals p_safe at d = 0 and is
    non-decreasing in d, so a pessimistic prior only binds at close range.
    """
    p = _as_unit(p_safe, "p_safe")
    dist = np.asarray(d, dtype=float)
    if not np.all(np.isfinite(dist)) or np.any(dist < 0):
        raise DomainError("distance must be finite and non-negative")
    out = 1.0 - np.exp(-cfg.lam * dist) * (1.0 - p)
    return _match_shape(np.clip(out, 0.0, 1.0), p_safe, d)


def compose_viability(likelihood_cdf, attenuated_prior):
    """Viability = likelihood CDF value times attenuated prior, in [0, 1]."""
    lik = _as_unit(likelihood_cdf, "likelihood_cdf")
    pri = _as_unit(attenuated_prior, "attenuated_prior")
    out = np.clip(lik * pri, 0.0, 1.0)
    return _match_shape(out, likelihood_cdf, attenuated_prior)


def risk_from_viability(v):
    """Risk is one minus viability; reverses every viability ranking."""
    via = _as_unit(v, "viability")
    return _match_shape(np.clip(1.0 - via, 0.0, 1.0), v)
