"""Small dense-tensor network engine for the score predictor.

Implements exactly what the predictor needs: 3x3 same-padded convolutions,
dense layers, ReLU, a hand-written backward pass, Adam, and a checksummed
JSON model container.  Everything runs in float64 so gradient checks are
meaningful.

The default predictor is two 3x3 convs (19->32->64) over the 7x7 grid,
then dense 3136->120->84->1.  The 84-dim activation after the last hidden
layer is the embedding used by the continuity loss; the final scalar is
the architecture score.
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .costmodel import Skeleton
from .encoder import NormScaler
from .errors import IoError, RenasError

MAGIC = "RENAS1"
FORMAT_VERSION = 1

DEFAULT_CONV = (32, 64)
DEFAULT_DENSE = (120, 84)


class ShapeMismatch(RenasError):
    pass


class StateMismatch(RenasError):
    pass


class VersionMismatch(RenasError):
    pass


class CorruptFile(RenasError):
    pass


@dataclass
class PredictorModel:
    arch: dict
    weights: dict[str, np.ndarray]
    scaler: NormScaler | None
    skeleton: Skeleton
    seed: int

    @property
    def embed_dim(self) -> int:
        return self.arch["dense"][-2]


@dataclass
class AdamState:
    lr: float = 1e-3
    weight_decay: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def init_model(
    seed: int,
    scaler: NormScaler | None = None,
    skeleton: Skeleton | None = None,
    conv_channels: tuple[int, ...] = DEFAULT_CONV,
    dense_sizes: tuple[int, ...] = DEFAULT_DENSE,
    input_shape: tuple[int, int, int] = (19, 7, 7),
) -> PredictorModel:
    """Fan-in-scaled uniform weights, zero biases, seeded generator."""
    if len(conv_channels) < 1 or len(dense_sizes) < 1:
        raise ValueError("need at least one conv and one hidden dense layer")
    rng = np.random.default_rng(seed)
    arch = {
        "input": list(input_shape),
        "conv": list(conv_channels),
        "dense": list(dense_sizes) + [1],
    }
    weights: dict[str, np.ndarray] = {}
    c_in, hw = input_shape[0], input_shape[1]
    for i, c_out in enumerate(conv_channels):
        fan_in = c_in * 9
        bound = 1.0 / np.sqrt(fan_in)
        weights[f"conv{i}_w"] = rng.uniform(-bound, bound, size=(c_out, c_in, 3, 3))
        weights[f"conv{i}_b"] = np.zeros(c_out)
        c_in = c_out
    d_in = c_in * hw * input_shape[2]
    for i, d_out in enumerate(arch["dense"]):
        bound = 1.0 / np.sqrt(d_in)
        weights[f"dense{i}_w"] = rng.uniform(-bound, bound, size=(d_out, d_in))
        weights[f"dense{i}_b"] = np.zeros(d_out)
        d_in = d_out
    return PredictorModel(
        arch=arch,
        weights=weights,
        scaler=scaler,
        skeleton=skeleton or Skeleton(),
        seed=seed,
    )


def _im2col(x: np.ndarray) -> np.ndarray:
    # (B, C, H, W) -> (B, C*9, H*W) patches of the zero-padded 3x3 window
    b, c, h, w = x.shape
    padded = np.zeros((b, c, h + 2, w + 2), dtype=x.dtype)
    padded[:, :, 1:-1, 1:-1] = x
    cols = np.empty((b, c, 9, h, w), dtype=x.dtype)
    k = 0
    for di in range(3):
        for dj in range(3):
            cols[:, :, k] = padded[:, :, di : di + h, dj : dj + w]
            k += 1
    return cols.reshape(b, c * 9, h * w)


def _col2im(dcols: np.ndarray, c: int, h: int, w: int) -> np.ndarray:
    b = dcols.shape[0]
    dc = dcols.reshape(b, c, 9, h, w)
    dpad = np.zeros((b, c, h + 2, w + 2), dtype=dcols.dtype)
    k = 0
    for di in range(3):
        for dj in range(3):
            dpad[:, :, di : di + h, dj : dj + w] += dc[:, :, k]
            k += 1
    return dpad[:, :, 1:-1, 1:-1]


def _check_batch(model: PredictorModel, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    want = tuple(model.arch["input"])
    if batch.ndim != 4 or batch.shape[1:] != want:
        raise ShapeMismatch(f"expected (B, {want[0]}, {want[1]}, {want[2]}), got {batch.shape}")
    return batch


def forward_cache(model: PredictorModel, batch: np.ndarray) -> tuple[np.ndarray, np.ndarray, dict]:
    """Forward pass keeping every intermediate needed by backward."""
    x = _check_batch(model, batch)
    b = x.shape[0]
    h, w = model.arch["input"][1:]
    cache: dict = {"token": id(model.weights), "batch": b, "conv": [], "dense": []}
    for i, c_out in enumerate(model.arch["conv"]):
        cols = _im2col(x)
        wmat = model.weights[f"conv{i}_w"].reshape(c_out, -1)
        pre = wmat @ cols + model.weights[f"conv{i}_b"][None, :, None]
        act = np.maximum(pre, 0.0)
        cache["conv"].append({"in_channels": x.shape[1], "cols": cols, "pre": pre})
        x = act.reshape(b, c_out, h, w)
    flat = x.reshape(b, -1)
    act = flat
    n_dense = len(model.arch["dense"])
    for i in range(n_dense):
        pre = act @ model.weights[f"dense{i}_w"].T + model.weights[f"dense{i}_b"]
        cache["dense"].append({"in": act, "pre": pre})
        act = pre if i == n_dense - 1 else np.maximum(pre, 0.0)
    scores = act[:, 0]
    embeds = np.maximum(cache["dense"][-1]["in"], 0.0)  # post-ReLU by construction
    cache["embeds"] = embeds
    return scores, embeds, cache


def forward(model: PredictorModel, batch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scores and embeddings for a batch; pure function of (weights, input)."""
    scores, embeds, _ = forward_cache(model, batch)
    return scores, embeds


def backward(
    model: PredictorModel,
    cache: dict,
    dscores: np.ndarray,
    dembeds: np.ndarray | None = None,
) -> dict[str, np.ndarray]:
    """Gradients of sum(dscores*scores) + sum(dembeds*embeds) w.r.t. weights."""
    if cache.get("token") != id(model.weights):
        raise StateMismatch("cache was built by a different model instance")
    b = cache["batch"]
    dscores = np.asarray(dscores, dtype=np.float64)
    if dscores.shape != (b,):
        raise ShapeMismatch(f"dscores shape {dscores.shape}, batch is {b}")
    n_dense = len(model.arch["dense"])
    if dembeds is None:
        dembeds = np.zeros((b, model.embed_dim))
    dembeds = np.asarray(dembeds, dtype=np.float64)
    if dembeds.shape != (b, model.embed_dim):
        raise ShapeMismatch(f"dembeds shape {dembeds.shape}")

    grads: dict[str, np.ndarray] = {}
    # final dense layer (linear)
    last = cache["dense"][-1]
    dpre = dscores[:, None]
    grads[f"dense{n_dense - 1}_w"] = dpre.T @ cache["embeds"]
    grads[f"dense{n_dense - 1}_b"] = dpre.sum(axis=0)
    dact = dpre @ model.weights[f"dense{n_dense - 1}_w"] + dembeds
    # hidden dense layers (ReLU)
    for i in range(n_dense - 2, -1, -1):
        layer = cache["dense"][i]
        dpre = dact * (layer["pre"] > 0)
        grads[f"dense{i}_w"] = dpre.T @ layer["in"]
        grads[f"dense{i}_b"] = dpre.sum(axis=0)
        dact = dpre @ model.weights[f"dense{i}_w"]
    # back through flatten into the conv stack
    h, w = model.arch["input"][1:]
    dx = dact.reshape(b, model.arch["conv"][-1], h, w)
    for i in range(len(model.arch["conv"]) - 1, -1, -1):
        conv = cache["conv"][i]
        c_out = model.arch["conv"][i]
        dpre = dx.reshape(b, c_out, h * w) * (conv["pre"] > 0)
        wmat = model.weights[f"conv{i}_w"].reshape(c_out, -1)
        # fold the batch into the patch axis so both contractions are GEMMs
        dpre_flat = np.ascontiguousarray(dpre.transpose(1, 0, 2)).reshape(c_out, -1)
        cols_flat = np.ascontiguousarray(conv["cols"].transpose(1, 0, 2)).reshape(
            conv["cols"].shape[1], -1
        )
        grads[f"conv{i}_w"] = (dpre_flat @ cols_flat.T).reshape(
            model.weights[f"conv{i}_w"].shape
        )
        grads[f"conv{i}_b"] = dpre.sum(axis=(0, 2))
        dcols = np.matmul(wmat.T, dpre)
        dx = _col2im(dcols, conv["in_channels"], h, w)
    return grads


def init_adam(model: PredictorModel, lr: float = 1e-3, weight_decay: float = 5e-4) -> AdamState:
    state = AdamState(lr=lr, weight_decay=weight_decay)
    for name, arr in model.weights.items():
        state.m[name] = np.zeros_like(arr)
        state.v[name] = np.zeros_like(arr)
    return state


def adam_step(
    model: PredictorModel, grads: dict[str, np.ndarray], state: AdamState
) -> tuple[PredictorModel, AdamState]:
    """One in-place Adam update; weight decay is added to the gradient."""
    state.step += 1
    t = state.step
    for name, w in model.weights.items():
        if name not in grads:
            raise ShapeMismatch(f"missing gradient for {name}")
        g = grads[name]
        if g.shape != w.shape:
            raise ShapeMismatch(f"gradient shape {g.shape} != weight shape {w.shape}")
        if state.weight_decay:
            g = g + state.weight_decay * w
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1 - state.beta1) * g
        v *= state.beta2
        v += (1 - state.beta2) * np.square(g)
        m_hat = m / (1 - state.beta1**t)
        v_hat = v / (1 - state.beta2**t)
        w -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return model, state


def _payload(model: PredictorModel) -> dict:
    return {
        "magic": MAGIC,
        "version": FORMAT_VERSION,
        "arch": model.arch,
        "seed": model.seed,
        "scaler": model.scaler.as_dict() if model.scaler else None,
        "skeleton": {
            "input_hw": model.skeleton.input_hw,
            "stem_channels": model.skeleton.stem_channels,
            "stacks": model.skeleton.stacks,
            "cells_per_stack": model.skeleton.cells_per_stack,
        },
        "weights": {
            name: {
                "shape": list(arr.shape),
                "data": base64.b64encode(
                    np.ascontiguousarray(arr, dtype="<f8").tobytes()
                ).decode("ascii"),
            }
            for name, arr in sorted(model.weights.items())
        },
    }


def _digest(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def save(model: PredictorModel, path: str) -> None:
    payload = _payload(model)
    payload["checksum"] = _digest({k: v for k, v in payload.items() if k != "checksum"})
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc


def load(path: str) -> PredictorModel:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    try:
        payload = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise CorruptFile(f"not a model file: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("magic") != MAGIC:
        raise CorruptFile("bad magic string")
    if payload.get("version") != FORMAT_VERSION:
        raise VersionMismatch(f"format version {payload.get('version')}, expected {FORMAT_VERSION}")
    stored = payload.get("checksum")
    if stored != _digest({k: v for k, v in payload.items() if k != "checksum"}):
        raise CorruptFile("checksum mismatch")
    try:
        weights = {}
        for name, entry in payload["weights"].items():
            arr = np.frombuffer(
                base64.b64decode(entry["data"]), dtype="<f8"
            ).reshape(entry["shape"])
            weights[name] = arr.copy()  # writable
        scaler = NormScaler.from_dict(payload["scaler"]) if payload["scaler"] else None
        sk = Skeleton(**payload["skeleton"])
        return PredictorModel(
            arch=payload["arch"],
            weights=weights,
            scaler=scaler,
            skeleton=sk,
            seed=int(payload["seed"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptFile(f"malformed model payload: {exc}") from exc
