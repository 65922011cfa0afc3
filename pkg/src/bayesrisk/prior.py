"""Semantic common-sense prior: object LUT + pairwise risk LUT.

The object LUT maps feature vectors to category strings by nearest
neighbor over K-means centroids (K = 5 per category).  The risk LUT maps
unordered category pairs to a 1 (unsafe) .. 5 (safe) rating with a hazard
reason, convertible to a safety probability.  Tables can be ingested from
text files or generated through a generic text-completion endpoint.
"""

from __future__ import annotations

import itertools
import logging
import os
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import (ContractViolation, DomainError, FormatError, LookupMissError,
                     SchemaError, TransportError)

log = logging.getLogger(__name__)

DEFAULT_K = 5
OVERRIDE_REASON = "no-risk override"
UNRATED_REASON = "unrated"
HAZARD_MENU = ("spillage", "crushing", "fire hazard", "electrocution")


def _pair_key(cat_a: str, cat_b: str) -> tuple[str, str]:
    return (cat_a, cat_b) if cat_a <= cat_b else (cat_b, cat_a)


@dataclass
class ObjectLUT:
    entries: dict[str, np.ndarray]  # category -> (k, dim) centroids
    feature_dim: int
    k: int = DEFAULT_K

    def __post_init__(self):
        for cat, cents in self.entries.items():
            if cents.shape != (self.k, self.feature_dim):
                raise ContractViolation(f"category {cat!r}: expected {self.k} centroids of dim {self.feature_dim}")
            if not np.all(np.isfinite(cents)):
                raise ContractViolation(f"category {cat!r}: non-finite centroid")


@dataclass
class RiskLUT:
    entries: dict[tuple[str, str], tuple[int, str]] = field(default_factory=dict)
    default_rating: int | None = None
    safe_categories: frozenset[str] = frozenset()


def _kmeans_pp_init(samples: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = samples.shape[0]
    centroids = [samples[rng.integers(n)]]
    for _ in range(1, k):
        d2 = np.min(
            ((samples[:, None, :] - np.array(centroids)[None, :, :]) ** 2).sum(-1), axis=1
        )
        total = d2.sum()
        if total == 0:
            centroids.append(samples[rng.integers(n)])
        else:
            centroids.append(samples[rng.choice(n, p=d2 / total)])
    return np.array(centroids)


def kmeans(samples: np.ndarray, k: int, iters: int, rng: np.random.Generator) -> np.ndarray:
    """Lloyd's iterations with k-means++ seeding; empty clusters reseed to the farthest point."""
    centroids = _kmeans_pp_init(samples, k, rng)
    for _ in range(iters):
        d2 = ((samples[:, None, :] - centroids[None, :, :]) ** 2).sum(-1)
        assign = np.argmin(d2, axis=1)
        new = centroids.copy()
        for c in range(k):
            members = samples[assign == c]
            if len(members) == 0:
                new[c] = samples[np.argmax(np.min(d2, axis=1))]
            else:
                new[c] = members.mean(axis=0)
        if np.allclose(new, centroids):
            break
        centroids = new
    return centroids


def within_cluster_sse(samples: np.ndarray, centroids: np.ndarray) -> float:
    d2 = ((samples[:, None, :] - centroids[None, :, :]) ** 2).sum(-1)
    return float(np.min(d2, axis=1).sum())


def build_object_lut(samples: dict[str, np.ndarray], k: int = DEFAULT_K,
                     iters: int = 50, seed: int = 0) -> ObjectLUT:
    """K-means per category; categories with fewer than k samples are duplicated."""
    if not samples:
        raise ContractViolation("no sample categories given")
    rng = np.random.default_rng(seed)
    dim = next(iter(samples.values())).shape[1]
    entries: dict[str, np.ndarray] = {}
    for cat in sorted(samples):
        pts = np.asarray(samples[cat], dtype=float)
        if pts.shape[0] < k:
            log.warning("category %r has %d < %d samples; duplicating", cat, pts.shape[0], k)
            reps = int(np.ceil(k / pts.shape[0]))
            pts = np.tile(pts, (reps, 1))
        entries[cat] = kmeans(pts, k, iters, rng)
    return ObjectLUT(entries, dim, k)


def match_category(lut: ObjectLUT, feat: np.ndarray,
                   max_distance: float | None = None) -> tuple[str, float]:
    """Category owning the globally nearest centroid; ties go lexicographically."""
    if not lut.entries:
        raise LookupMissError("object LUT is empty")
    feat = np.asarray(feat, dtype=float)
    if feat.shape != (lut.feature_dim,):
        raise SchemaError(f"query dim {feat.shape} != LUT dim {lut.feature_dim}")
    best_cat, best_dist = None, np.inf
    for cat in sorted(lut.entries):
        dist = float(np.min(np.linalg.norm(lut.entries[cat] - feat, axis=1)))
        if dist < best_dist:
            best_cat, best_dist = cat, dist
    if max_distance is not None and best_dist > max_distance:
        raise LookupMissError(f"nearest centroid at {best_dist:.4g} exceeds cutoff {max_distance}")
    return best_cat, best_dist


def lookup_rating(lut: RiskLUT, cat_a: str, cat_b: str) -> tuple[int, str]:
    """Order-normalized pair lookup with optional zero-risk override and default."""
    if cat_a in lut.safe_categories or cat_b in lut.safe_categories:
        return 5, OVERRIDE_REASON
    key = _pair_key(cat_a, cat_b)
    if key in lut.entries:
        return lut.entries[key]
    if lut.default_rating is not None:
        return lut.default_rating, UNRATED_REASON
    raise LookupMissError(f"no rating for pair {key}")


def rating_to_prob(rating: int) -> float:
    """Linear map of the 1 (unsafe) .. 5 (safe) rating onto [0, 1]."""
    if rating not in (1, 2, 3, 4, 5):
        raise DomainError(f"rating must be an integer in 1..5, got {rating}")
    return (rating - 1) / 4.0


def _add_entry(lut: RiskLUT, cat_a: str, cat_b: str, rating: int, reason: str) -> None:
    key = _pair_key(cat_a, cat_b)
    if key in lut.entries and lut.entries[key][0] != rating:
        kept = min(lut.entries[key][0], rating)
        log.warning("conflicting ratings for %s (%d vs %d); keeping %d",
                    key, lut.entries[key][0], rating, kept)
        if kept == rating:
            lut.entries[key] = (rating, reason)
        return
    lut.entries[key] = (rating, reason)


def _apply_overrides(lut: RiskLUT) -> None:
    for key in list(lut.entries):
        if key[0] in lut.safe_categories or key[1] in lut.safe_categories:
            lut.entries[key] = (5, OVERRIDE_REASON)


def ingest_risk_table(path, safe_categories=(), default_rating: int | None = None) -> RiskLUT:
    """Load `category_a|category_b|rating|reason` lines; conflicts keep the lower rating."""
    lut = RiskLUT(default_rating=default_rating, safe_categories=frozenset(safe_categories))
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("|")
            if len(parts) < 4:
                raise FormatError(f"{path}:{lineno}: expected 'a|b|rating|reason'")
            cat_a, cat_b, rating_s = (s.strip() for s in parts[:3])
            reason = "|".join(parts[3:]).strip()
            try:
                rating = int(rating_s)
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: bad rating {rating_s!r}") from exc
            if rating not in (1, 2, 3, 4, 5):
                raise FormatError(f"{path}:{lineno}: rating {rating} out of 1..5")
            _add_entry(lut, cat_a, cat_b, rating, reason)
    _apply_overrides(lut)
    return lut


def save_risk_table(lut: RiskLUT, path) -> None:
    with open(path, "w") as f:
        for (a, b), (rating, reason) in sorted(lut.entries.items()):
            f.write(f"{a}|{b}|{rating}|{reason}\n")


def save_object_lut(lut: ObjectLUT, path) -> None:
    """Text header (categories, dim, k) followed by a raw f64 centroid block."""
    cats = sorted(lut.entries)
    with open(path, "wb") as f:
        header = [f"OLUT 1", f"dim {lut.feature_dim}", f"k {lut.k}", f"categories {len(cats)}"]
        header += cats + [""]
        f.write(("\n".join(header) + "\n").encode())
        for cat in cats:
            f.write(np.ascontiguousarray(lut.entries[cat], dtype="<f8").tobytes())


def load_object_lut(path) -> ObjectLUT:
    with open(path, "rb") as f:
        data = f.read()
    sep = data.find(b"\n\n")
    if sep < 0 or not data.startswith(b"OLUT 1"):
        raise FormatError(f"{path} is not an object LUT file")
    lines = data[:sep].decode().splitlines()
    try:
        dim = int(lines[1].split()[1])
        k = int(lines[2].split()[1])
        ncat = int(lines[3].split()[1])
        cats = lines[4 : 4 + ncat]
    except (IndexError, ValueError) as exc:
        raise FormatError(f"malformed object LUT header in {path}") from exc
    block = np.frombuffer(data[sep + 2 :], dtype="<f8")
    if block.size != ncat * k * dim:
        raise SchemaError(f"{path}: centroid block size mismatch")
    block = block.reshape(ncat, k, dim)
    return ObjectLUT({cat: block[i].copy() for i, cat in enumerate(cats)}, dim, k)


# ---------------------------------------------------------------------------
# Risk-table generation through a text-completion endpoint
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EndpointConfig:
    url: str = ""
    model: str = ""
    token_env: str = "BAYESRISK_ENDPOINT_TOKEN"
    timeout_s: float = 60.0
    replay_path: str | None = None  # offline mode: recorded response text
    pairs_per_prompt: int = 40
    response_field: str = "completion"


@dataclass
class GenerationResult:
    lut: RiskLUT
    skipped: list[tuple[str, str]]
    transcript: list[tuple[str, str]]  # (prompt, response)


def load_prompt_template() -> str:
    return resources.files("bayesrisk").joinpath("data/risk_prompt_template.txt").read_text()


def load_bundled_categories() -> list[str]:
    text = resources.files("bayesrisk").joinpath("data/object_categories.txt").read_text()
    return [ln.strip() for ln in text.splitlines() if ln.strip()]


def parse_rating_lines(text: str, wanted: set[tuple[str, str]]):
    """Extract (a, b, rating, reason) tuples for requested pairs from a response."""
    found = {}
    for line in text.splitlines():
        parts = line.strip().split("|")
        if len(parts) < 4:
            continue
        a, b, rating_s = (s.strip().lower() for s in parts[:3])
        reason = "|".join(parts[3:]).strip()
        key = _pair_key(a, b)
        if key not in wanted:
            continue
        try:
            rating = int(rating_s)
        except ValueError:
            continue
        if rating in (1, 2, 3, 4, 5):
            found[key] = (rating, reason)
    return found


def _request_completion(cfg: EndpointConfig, prompt: str) -> str:
    import requests

    headers = {}
    token = os.environ.get(cfg.token_env, "")
    if token:
        headers["Authorization"] = f"Bearer {token}"
    payload = {"prompt": prompt}
    if cfg.model:
        payload["model"] = cfg.model
    try:
        resp = requests.post(cfg.url, json=payload, headers=headers, timeout=cfg.timeout_s)
        resp.raise_for_status()
        body = resp.json()
    except Exception as exc:  # noqa: BLE001 - any transport failure maps to one error
        raise TransportError(f"completion endpoint failed: {exc}") from exc
    if cfg.response_field not in body:
        raise TransportError(f"endpoint response missing field {cfg.response_field!r}")
    return str(body[cfg.response_field])


def generate_risk_table(cfg: EndpointConfig, categories: list[str],
                        prompt_template: str | None = None,
                        safe_categories=(), max_attempts: int = 3) -> GenerationResult:
    """Rate every unordered category pair through the endpoint (or a recorded replay).

    Responses are expected to carry `a|b|rating|reason` lines; batches whose
    pairs stay unparsed are retried up to max_attempts, and anything still
    missing afterwards is reported as skipped.
    """
    template = prompt_template if prompt_template is not None else load_prompt_template()
    categories = sorted({c.strip().lower() for c in categories})
    pairs = [(a, b) for a, b in itertools.combinations(categories, 2)]
    lut = RiskLUT(safe_categories=frozenset(safe_categories))
    transcript: list[tuple[str, str]] = []
    skipped: list[tuple[str, str]] = []

    replay_text = None
    if cfg.replay_path is not None:
        with open(cfg.replay_path) as f:
            replay_text = f.read()

    for start in range(0, len(pairs), cfg.pairs_per_prompt):
        batch = pairs[start : start + cfg.pairs_per_prompt]
        wanted = set(batch)
        pair_lines = "\n".join(f"{a} | {b}" for a, b in batch)
        prompt = template.format(pairs=pair_lines, hazards=", ".join(HAZARD_MENU))
        remaining = set(wanted)
        for _ in range(max_attempts):
            if not remaining:
                break
            response = replay_text if replay_text is not None else _request_completion(cfg, prompt)
            transcript.append((prompt, response))
            for key, (rating, reason) in parse_rating_lines(response, remaining).items():
                _add_entry(lut, key[0], key[1], rating, reason)
                remaining.discard(key)
            if replay_text is not None:
                break  # a recording cannot change between attempts
        skipped.extend(sorted(remaining))
    for pair in skipped:
        log.warning("pair %s could not be rated; skipped", pair)
    _apply_overrides(lut)
    return GenerationResult(lut, skipped, transcript)
