"""Single structured config file (INI-style key = value sections).

Every CLI command reads the same file; command-line flags override
individual keys.  The endpoint auth token never lives in the file, only
the name of the environment variable that holds it.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields

from .errors import ConfigError


@dataclass
class Config:
    # [risk]
    lam: float = 0.5
    d_max: float = 2.0
    alpha: float = 0.1
    percentile: float = 75.0
    k: int = 5
    seed: int = 0
    # [training]
    feature_dim: int = 32
    width: int = 64
    layers: int = 2
    learning_rate: float = 1e-3
    epochs: int = 20
    batch_size: int = 32
    # [planner]
    voxel: float = 0.05
    resolution: float = 0.02
    bounds_min: tuple = (-1.0, -1.0, -1.0)
    bounds_max: tuple = (1.0, 1.0, 1.0)
    # [camera]
    fx: float = 100.0
    fy: float = 100.0
    cx: float = 0.0
    cy: float = 0.0
    # [endpoint]
    endpoint_url: str = ""
    endpoint_model: str = ""
    token_env: str = "BAYESRISK_ENDPOINT_TOKEN"
    timeout_s: float = 60.0
    replay: str = ""
    pairs_per_prompt: int = 40

    def validate(self) -> "Config":
        checks = [
            ("lam", self.lam > 0), ("d_max", self.d_max > 0),
            ("alpha", 0 <= self.alpha <= 1), ("percentile", 0 < self.percentile <= 100),
            ("k", self.k >= 1), ("width", self.width >= 8),
            ("layers", self.layers >= 1), ("learning_rate", self.learning_rate > 0),
            ("epochs", self.epochs >= 1), ("batch_size", self.batch_size >= 1),
            ("voxel", self.voxel > 0), ("resolution", self.resolution > 0),
        ]
        for name, ok in checks:
            if not ok:
                raise ConfigError(f"config value {name} = {getattr(self, name)!r} out of range")
        return self


_SECTIONS = {
    "risk": ["lam", "d_max", "alpha", "percentile", "k", "seed"],
    "training": ["feature_dim", "width", "layers", "learning_rate", "epochs", "batch_size"],
    "planner": ["voxel", "resolution", "bounds_min", "bounds_max"],
    "camera": ["fx", "fy", "cx", "cy"],
    "endpoint": ["endpoint_url", "endpoint_model", "token_env", "timeout_s",
                 "replay", "pairs_per_prompt"],
}


def _coerce(current, raw: str):
    if isinstance(current, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, tuple):
        return tuple(float(v) for v in raw.replace(",", " ").split())
    return raw


def load_config(path: str | None) -> Config:
    cfg = Config()
    if path is None:
        return cfg.validate()
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(path)
    known = {f.name: f for f in fields(Config)}
    for section, keys in _SECTIONS.items():
        if not parser.has_section(section):
            continue
        for key, raw in parser.items(section):
            if key not in keys:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            try:
                setattr(cfg, key, _coerce(getattr(cfg, key), raw))
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc
    return cfg.validate()
