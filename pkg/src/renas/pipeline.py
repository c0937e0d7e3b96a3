"""Training and scoring plumbing on top of the core modules.

Wires records -> tensors -> predictor: fits the normalization scaler on
the training set, runs the Adam loop with the chosen loss, and scores
cell batches with a saved model.  Everything is driven by one seeded
generator so a (config, seed) pair reproduces runs bit for bit.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import ranking, tensornet
from .cellgraph import CellGraph, augmentations
from .costmodel import Skeleton, network_costs
from .datastore import ArchRecord
from .encoder import NormScaler, encode, fit_scaler
from .errors import RenasError
from .metrics import RankReport, kendall_tau

LOSS_CHOICES = ("combined", "l1", "mse")
SCORE_BATCH = 512


class BadLossChoice(RenasError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch: int = 1024
    lr: float = 1e-3
    weight_decay: float = 5e-4
    seed: int = 0
    loss: str = "combined"
    loss_cfg: ranking.LossConfig = field(default_factory=ranking.LossConfig)
    augment: bool = False
    augment_cap: int = 24
    eval_every: int = 10  # holdout KTau interval; 0 = final epoch only

    def __post_init__(self):
        if self.loss not in LOSS_CHOICES:
            raise BadLossChoice(f"loss must be one of {LOSS_CHOICES}")
        if self.epochs < 0 or self.batch < 1:
            raise ValueError("epochs must be >= 0 and batch >= 1")
        if self.lr <= 0 or self.weight_decay < 0:
            raise ValueError("lr must be > 0 and weight_decay >= 0")


def encode_cell(g: CellGraph, sk: Skeleton, scaler: NormScaler | None = None) -> np.ndarray:
    return encode(g, network_costs(g, sk), scaler)


def encode_records(
    records: Sequence[ArchRecord],
    sk: Skeleton,
    scaler: NormScaler | None = None,
    augment: bool = False,
    augment_cap: int = 24,
) -> tuple[np.ndarray, np.ndarray]:
    """Stack tensors and labels; augmented variants inherit the label."""
    tensors = []
    labels = []
    for r in records:
        cells = augmentations(r.cell, cap=augment_cap) if augment else [r.cell]
        for g in cells:
            tensors.append(encode_cell(g, sk, scaler))
            labels.append(r.val_acc)
    return np.stack(tensors), np.array(labels, dtype=np.float64)


def _loss_step(model, x, y, cfg: TrainConfig, rng) -> tuple[float, dict]:
    scores, embeds, cache = tensornet.forward_cache(model, x)
    if cfg.loss == "mse":
        value, dscores = ranking.mse_loss(scores, y)
        grads = tensornet.backward(model, cache, dscores)
    elif cfg.loss == "l1":
        value, dscores = ranking.pairwise_rank_loss(scores, y, cfg.loss_cfg)
        grads = tensornet.backward(model, cache, dscores)
    else:
        value, dscores, dembeds = ranking.combined_loss(
            scores, embeds, y, cfg.loss_cfg, rng=rng
        )
        grads = tensornet.backward(model, cache, dscores, dembeds)
    return value, grads


def _min_batch(loss: str) -> int:
    return {"mse": 1, "l1": 2, "combined": 3}[loss]


def train_predictor(
    train_records: Sequence[ArchRecord],
    cfg: TrainConfig,
    sk: Skeleton | None = None,
    eval_records: Sequence[ArchRecord] | None = None,
    log_fn: Callable[[dict], None] | None = None,
) -> tuple[tensornet.PredictorModel, list[dict]]:
    """Fit scaler + predictor on the training records.

    Returns the model and a per-epoch log (loss always, holdout ktau at
    the configured interval).
    """
    if len(train_records) < _min_batch(cfg.loss):
        raise RenasError(f"{cfg.loss} loss needs at least {_min_batch(cfg.loss)} records")
    sk = sk or Skeleton()
    x_all, labels = encode_records(
        train_records, sk, augment=cfg.augment, augment_cap=cfg.augment_cap
    )
    scaler = fit_scaler(list(x_all))
    x_all[:, 0] /= scaler.type_max
    x_all[:, 1:10] /= scaler.flop_max
    x_all[:, 10:19] /= scaler.param_max

    model = tensornet.init_model(cfg.seed, scaler=scaler, skeleton=sk)
    state = tensornet.init_adam(model, lr=cfg.lr, weight_decay=cfg.weight_decay)
    rng = np.random.default_rng(cfg.seed)
    n = len(x_all)
    batch = min(cfg.batch, n)
    minimum = _min_batch(cfg.loss)
    log: list[dict] = []

    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        losses = []
        for start in range(0, n, batch):
            take = perm[start : start + batch]
            if len(take) < minimum:
                continue  # trailing slice too small for this loss
            value, grads = _loss_step(model, x_all[take], labels[take], cfg, rng)
            tensornet.adam_step(model, grads, state)
            losses.append(value)
        entry = {"epoch": epoch + 1, "loss": float(np.mean(losses)) if losses else None}
        due = (
            eval_records is not None
            and cfg.eval_every
            and (epoch + 1) % cfg.eval_every == 0
        )
        if eval_records is not None and (due or epoch + 1 == cfg.epochs):
            entry["ktau"] = evaluate(model, eval_records).ktau
        log.append(entry)
        if log_fn:
            log_fn(entry)
    if cfg.epochs == 0 and eval_records is not None:
        entry = {"epoch": 0, "loss": None, "ktau": evaluate(model, eval_records).ktau}
        log.append(entry)
        if log_fn:
            log_fn(entry)
    return model, log


def _thread_count() -> int:
    raw = os.environ.get("RENAS_THREADS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def score_cells(
    model: tensornet.PredictorModel, cells: Sequence[CellGraph]
) -> np.ndarray:
    """Predictor scores for a list of cells, in input order.

    Sharded across RENAS_THREADS workers in fixed-size chunks; results
    are gathered in index order so the output never depends on the
    thread count.
    """
    if len(cells) == 0:
        return np.zeros(0)
    sk = model.skeleton
    scaler = model.scaler

    def run_chunk(chunk: Sequence[CellGraph]) -> np.ndarray:
        x = np.stack([encode_cell(g, sk, scaler) for g in chunk])
        return tensornet.forward(model, x)[0]

    chunks = [cells[i : i + SCORE_BATCH] for i in range(0, len(cells), SCORE_BATCH)]
    workers = _thread_count()
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_chunk, chunks))
    else:
        parts = [run_chunk(c) for c in chunks]
    return np.concatenate(parts)


def evaluate(model: tensornet.PredictorModel, records: Sequence[ArchRecord]) -> RankReport:
    scores = score_cells(model, [r.cell for r in records])
    labels = np.array([r.val_acc for r in records])
    return kendall_tau(scores, labels)
