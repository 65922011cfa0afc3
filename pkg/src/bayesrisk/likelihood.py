"""Permutation-invariant attention regressor for safe-distance CDFs.

Maps an unordered pair of feature vectors to 10 non-decreasing Bezier
control points in (0, 1).  The two features are two tokens fed through
self-attention layers with no positional encoding, mean-pooled, and pushed
through a sigmoid output head followed by a running-max projection.

Everything is plain numpy with exact hand-derived reverse-mode gradients
(checked against central finite differences in the tests), trained with
minibatch SGD + momentum for full reproducibility.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DatasetError, FormatError, SchemaError

NUM_HEADS = 8
NUM_OUTPUTS = 10

_MAGIC = b"BRLM"
_VERSION = 1


@dataclass
class LikelihoodModel:
    feature_dim: int
    width: int
    layers: int
    heads: int
    ff_dim: int
    seed: int
    params: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def head_dim(self) -> int:
        return self.width // self.heads

    def param_names(self) -> list[str]:
        names = ["proj_w", "proj_b"]
        for i in range(self.layers):
            for n in ("wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo",
                      "ff1_w", "ff1_b", "ff2_w", "ff2_b"):
                names.append(f"l{i}_{n}")
        names += ["out_w", "out_b"]
        return names


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 1e-3
    epochs: int = 20
    batch_size: int = 32
    seed: int = 0
    momentum: float = 0.9

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs <= 0 or self.batch_size <= 0:
            raise ConfigError("learning_rate, epochs and batch_size must be positive")


def parameter_count(feature_dim: int, width: int, layers: int, ff_dim: int) -> int:
    """Closed-form parameter tally for the architecture."""
    per_layer = 4 * (width * width + width) + (width * ff_dim + ff_dim) + (ff_dim * width + width)
    return (feature_dim * width + width) + layers * per_layer + (width * NUM_OUTPUTS + NUM_OUTPUTS)


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=shape)


def init_model(feature_dim: int, width: int = 64, layers: int = 2, seed: int = 0) -> LikelihoodModel:
    """Fresh model with scaled-uniform weights, deterministic under the seed."""
    if width % NUM_HEADS != 0:
        raise ConfigError(f"width must be divisible by {NUM_HEADS}, got {width}")
    if layers < 1:
        raise ConfigError("need at least one attention layer")
    ff_dim = 2 * width
    rng = np.random.default_rng(seed)
    p: dict[str, np.ndarray] = {}
    p["proj_w"] = _glorot(rng, feature_dim, width, (feature_dim, width))
    p["proj_b"] = np.zeros(width)
    for i in range(layers):
        for n in ("wq", "wk", "wv", "wo"):
            p[f"l{i}_{n}"] = _glorot(rng, width, width, (width, width))
        for n in ("bq", "bk", "bv", "bo"):
            p[f"l{i}_{n}"] = np.zeros(width)
        p[f"l{i}_ff1_w"] = _glorot(rng, width, ff_dim, (width, ff_dim))
        p[f"l{i}_ff1_b"] = np.zeros(ff_dim)
        p[f"l{i}_ff2_w"] = _glorot(rng, ff_dim, width, (ff_dim, width))
        p[f"l{i}_ff2_b"] = np.zeros(width)
    p["out_w"] = _glorot(rng, width, NUM_OUTPUTS, (width, NUM_OUTPUTS))
    p["out_b"] = np.zeros(NUM_OUTPUTS)
    return LikelihoodModel(feature_dim, width, layers, NUM_HEADS, ff_dim, seed, p)


def _sigmoid(x):
    return np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))


def _forward_batch(model: LikelihoodModel, A: np.ndarray, B: np.ndarray, want_cache: bool = False):
    """Batched forward pass.  A, B: (N, D) feature pairs -> (N, 10) control points."""
    p = model.params
    h, dk = model.heads, model.head_dim
    N = A.shape[0]
    X = np.stack([A, B], axis=1)  # (N, 2, D)
    H = X @ p["proj_w"] + p["proj_b"]
    scale = 1.0 / np.sqrt(dk)
    layer_caches = []
    for i in range(model.layers):
        Q = H @ p[f"l{i}_wq"] + p[f"l{i}_bq"]
        K = H @ p[f"l{i}_wk"] + p[f"l{i}_bk"]
        V = H @ p[f"l{i}_wv"] + p[f"l{i}_bv"]
        q = Q.reshape(N, 2, h, dk).transpose(0, 2, 1, 3)
        k = K.reshape(N, 2, h, dk).transpose(0, 2, 1, 3)
        v = V.reshape(N, 2, h, dk).transpose(0, 2, 1, 3)
        scores = q @ k.transpose(0, 1, 3, 2) * scale  # (N, h, 2, 2)
        scores = scores - scores.max(axis=-1, keepdims=True)
        e = np.exp(scores)
        attn = e / e.sum(axis=-1, keepdims=True)
        # Elementwise products + a single two-term addition keep the pass
        # bitwise symmetric under token swap (matmul reductions are not).
        ctx = (attn[..., :, :, None] * v[..., None, :, :]).sum(axis=3)  # (N, h, 2, dk)
        C = ctx.transpose(0, 2, 1, 3).reshape(N, 2, model.width)
        H1 = H + C @ p[f"l{i}_wo"] + p[f"l{i}_bo"]
        Z = H1 @ p[f"l{i}_ff1_w"] + p[f"l{i}_ff1_b"]
        R = np.maximum(Z, 0.0)
        H2 = H1 + R @ p[f"l{i}_ff2_w"] + p[f"l{i}_ff2_b"]
        if want_cache:
            layer_caches.append((H, q, k, v, attn, C, H1, Z, R))
        H = H2
    pooled = H.mean(axis=1)  # (N, W)
    logits = pooled @ p["out_w"] + p["out_b"]
    s = _sigmoid(logits)
    cp = np.maximum.accumulate(s, axis=1)
    if not want_cache:
        return cp
    return cp, (X, layer_caches, H, pooled, s)


def _backward_batch(model: LikelihoodModel, cache, dcp: np.ndarray) -> dict[str, np.ndarray]:
    """Exact reverse-mode gradients for _forward_batch, given dL/dcp."""
    p = model.params
    h, dk, W = model.heads, model.head_dim, model.width
    X, layer_caches, Hfinal, pooled, s = cache
    N = X.shape[0]
    scale = 1.0 / np.sqrt(dk)
    g: dict[str, np.ndarray] = {}

    # Running max: each output's gradient routes to the (first) active element.
    cp = np.maximum.accumulate(s, axis=1)
    active = np.zeros_like(s, dtype=int)
    for j in range(1, NUM_OUTPUTS):
        stay = s[:, j] <= cp[:, j - 1]
        active[:, j] = np.where(stay, active[:, j - 1], j)
    ds = np.zeros_like(s)
    rows = np.broadcast_to(np.arange(N)[:, None], active.shape)
    np.add.at(ds, (rows, active), dcp)

    dlogits = ds * s * (1.0 - s)
    g["out_w"] = pooled.T @ dlogits
    g["out_b"] = dlogits.sum(axis=0)
    dpooled = dlogits @ p["out_w"].T
    dH = np.repeat(dpooled[:, None, :] / 2.0, 2, axis=1)  # mean pool over 2 tokens

    flat = lambda M: M.reshape(-1, M.shape[-1])
    for i in reversed(range(model.layers)):
        Hin, q, k, v, attn, C, H1, Z, R = layer_caches[i]
        # feed-forward with residual: H2 = H1 + relu(H1 W1 + b1) W2 + b2
        dH1 = dH.copy()
        g[f"l{i}_ff2_w"] = flat(R).T @ flat(dH)
        g[f"l{i}_ff2_b"] = dH.sum(axis=(0, 1))
        dZ = (dH @ p[f"l{i}_ff2_w"].T) * (Z > 0)
        g[f"l{i}_ff1_w"] = flat(H1).T @ flat(dZ)
        g[f"l{i}_ff1_b"] = dZ.sum(axis=(0, 1))
        dH1 += dZ @ p[f"l{i}_ff1_w"].T
        # attention with residual: H1 = Hin + concat(heads) Wo + bo
        dattn_out = dH1
        g[f"l{i}_wo"] = flat(C).T @ flat(dattn_out)
        g[f"l{i}_bo"] = dattn_out.sum(axis=(0, 1))
        dC = dattn_out @ p[f"l{i}_wo"].T
        dctx = dC.reshape(N, 2, h, dk).transpose(0, 2, 1, 3)
        dA = dctx @ v.transpose(0, 1, 3, 2)
        dv = attn.transpose(0, 1, 3, 2) @ dctx
        dscores = attn * (dA - (dA * attn).sum(axis=-1, keepdims=True))
        dq = dscores @ k * scale
        dk_ = dscores.transpose(0, 1, 3, 2) @ q * scale
        dQ = dq.transpose(0, 2, 1, 3).reshape(N, 2, W)
        dK = dk_.transpose(0, 2, 1, 3).reshape(N, 2, W)
        dV = dv.transpose(0, 2, 1, 3).reshape(N, 2, W)
        g[f"l{i}_wq"] = flat(Hin).T @ flat(dQ)
        g[f"l{i}_bq"] = dQ.sum(axis=(0, 1))
        g[f"l{i}_wk"] = flat(Hin).T @ flat(dK)
        g[f"l{i}_bk"] = dK.sum(axis=(0, 1))
        g[f"l{i}_wv"] = flat(Hin).T @ flat(dV)
        g[f"l{i}_bv"] = dV.sum(axis=(0, 1))
        dH = dH1 + dQ @ p[f"l{i}_wq"].T + dK @ p[f"l{i}_wk"].T + dV @ p[f"l{i}_wv"].T
    g["proj_w"] = flat(X).T @ flat(dH)
    g["proj_b"] = dH.sum(axis=(0, 1))
    return g


def forward(model: LikelihoodModel, feat_a: np.ndarray, feat_b: np.ndarray) -> np.ndarray:
    """Predict 10 non-decreasing control points in (0, 1) for an unordered pair."""
    a = np.asarray(feat_a, dtype=float)
    b = np.asarray(feat_b, dtype=float)
    if a.shape != (model.feature_dim,) or b.shape != (model.feature_dim,):
        raise SchemaError(f"expected features of dim {model.feature_dim}")
    return _forward_batch(model, a[None], b[None])[0]


def loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean squared error over the 10 control points."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise SchemaError("pred/target shape mismatch")
    return float(np.mean((pred - target) ** 2))


def backward(model: LikelihoodModel, feat_a, feat_b, target) -> dict[str, np.ndarray]:
    """Gradients of loss(forward(a, b), target) w.r.t. every parameter."""
    a = np.asarray(feat_a, dtype=float)[None]
    b = np.asarray(feat_b, dtype=float)[None]
    t = np.asarray(target, dtype=float)[None]
    cp, cache = _forward_batch(model, a, b, want_cache=True)
    dcp = 2.0 * (cp - t) / NUM_OUTPUTS
    return _backward_batch(model, cache, dcp)


def _dataset_arrays(examples):
    A = np.array([np.asarray(e.feat_a, dtype=float) for e in examples])
    B = np.array([np.asarray(e.feat_b, dtype=float) for e in examples])
    T = np.array([np.asarray(e.target, dtype=float) for e in examples])
    return A, B, T


def dataset_loss(model: LikelihoodModel, examples) -> float:
    A, B, T = _dataset_arrays(examples)
    return float(np.mean((_forward_batch(model, A, B) - T) ** 2))


def train(model: LikelihoodModel, examples, config: TrainingConfig) -> tuple[LikelihoodModel, list[float]]:
    """Minibatch SGD with momentum; history[0] is the pre-training dataset MSE."""
    if not examples:
        raise DatasetError("empty training set")
    A, B, T = _dataset_arrays(examples)
    n = len(examples)
    rng = np.random.default_rng(config.seed)
    velocity = {k: np.zeros_like(v) for k, v in model.params.items()}
    history = [float(np.mean((_forward_batch(model, A, B) - T) ** 2))]
    for _ in range(config.epochs):
        perm = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            cp, cache = _forward_batch(model, A[idx], B[idx], want_cache=True)
            batch = len(idx)
            epoch_losses.append(float(np.mean((cp - T[idx]) ** 2)))
            dcp = 2.0 * (cp - T[idx]) / (NUM_OUTPUTS * batch)
            grads = _backward_batch(model, cache, dcp)
            for name, gval in grads.items():
                velocity[name] = config.momentum * velocity[name] - config.learning_rate * gval
                model.params[name] += velocity[name]
        history.append(float(np.mean(epoch_losses)))
    return model, history


def save_model(model: LikelihoodModel, path) -> None:
    """Binary container: magic, version, architecture header, f64 LE tensors."""
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<IIIIIIq", _VERSION, model.feature_dim, model.width,
                            model.layers, model.heads, model.ff_dim, model.seed))
        names = model.param_names()
        f.write(struct.pack("<I", len(names)))
        for name in names:
            arr = np.ascontiguousarray(model.params[name], dtype="<f8")
            enc = name.encode()
            f.write(struct.pack("<H", len(enc)))
            f.write(enc)
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.tobytes())


def load_model(path, expect_feature_dim: int | None = None) -> LikelihoodModel:
    with open(path, "rb") as f:
        data = f.read()
    off = 0

    def take(n):
        nonlocal off
        if off + n > len(data):
            raise FormatError(f"truncated model file {path}")
        chunk = data[off : off + n]
        off += n
        return chunk

    if take(4) != _MAGIC:
        raise FormatError(f"{path} is not a likelihood model file")
    header = take(struct.calcsize("<IIIIIIq"))
    version, feature_dim, width, layers, heads, ff_dim, seed = struct.unpack("<IIIIIIq", header)
    if version != _VERSION:
        raise FormatError(f"unsupported model version {version}")
    if expect_feature_dim is not None and feature_dim != expect_feature_dim:
        raise SchemaError(f"model feature dim {feature_dim} != expected {expect_feature_dim}")
    model = LikelihoodModel(feature_dim, width, layers, heads, ff_dim, seed, {})
    (count,) = struct.unpack("<I", take(4))
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2))
        name = take(nlen).decode()
        (ndim,) = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        size = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(take(8 * size), dtype="<f8").reshape(shape).copy()
        model.params[name] = arr
    expected = set(model.param_names())
    if set(model.params) != expected:
        raise SchemaError(f"model file {path} parameter set does not match its header")
    if model.params["proj_w"].shape != (feature_dim, width):
        raise SchemaError(f"model file {path} tensor shapes disagree with header")
    return model
