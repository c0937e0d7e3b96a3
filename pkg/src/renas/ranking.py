"""Rank-based training losses and the Lipschitz-ratio probe.

The predictor is trained to order architectures, not to regress their
accuracies.  Two losses implement that: a pairwise hinge on score pairs
whose predicted order contradicts the label order, and a triplet term
that pushes embedding distances to respect performance differences.  An
element-wise MSE baseline is kept for ablations.

All losses return (value, gradient) pairs where the value is the mean
over contributing pairs/triplets, so magnitudes do not depend on batch
size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import RenasError

PHI_CHOICES = ("hinge", "logistic", "exponential")


class BatchTooSmall(RenasError):
    pass


@dataclass(frozen=True)
class LossConfig:
    margin: float = 0.1
    continuity_weight: float = 1.0  # weight of the triplet term in the sum
    phi: str = "hinge"
    triplets_per_batch: int = 4096
    drop_equal_labels: bool = True

    def __post_init__(self):
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if self.continuity_weight < 0:
            raise ValueError("continuity weight must be >= 0")
        if self.phi not in PHI_CHOICES:
            raise ValueError(f"phi must be one of {PHI_CHOICES}")
        if self.triplets_per_batch < 1:
            raise ValueError("triplets_per_batch must be >= 1")


def _phi(z: np.ndarray, cfg: LossConfig) -> tuple[np.ndarray, np.ndarray]:
    """Penalty value and derivative in z; the hinge kink gets slope 0."""
    if cfg.phi == "hinge":
        value = np.maximum(cfg.margin - z, 0.0)
        deriv = np.where(z < cfg.margin, -1.0, 0.0)
    elif cfg.phi == "logistic":
        value = np.logaddexp(0.0, -z)
        deriv = -np.exp(-np.logaddexp(0.0, z))
    else:  # exponential
        value = np.exp(-z)
        deriv = -value
    return value, deriv


def pairwise_rank_loss(
    scores: np.ndarray, labels: np.ndarray, cfg: LossConfig
) -> tuple[float, np.ndarray]:
    """Mean hinge penalty over all within-batch score pairs."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    b = len(scores)
    if b < 2:
        raise BatchTooSmall("pairwise loss needs at least 2 rows")
    i, j = np.triu_indices(b, 1)
    sign = np.sign(labels[i] - labels[j])
    if cfg.drop_equal_labels:
        keep = sign != 0
        i, j, sign = i[keep], j[keep], sign[keep]
    grad = np.zeros(b)
    if len(i) == 0:
        return 0.0, grad
    z = (scores[i] - scores[j]) * sign
    value, deriv = _phi(z, cfg)
    coeff = deriv * sign / len(i)
    np.add.at(grad, i, coeff)
    np.add.at(grad, j, -coeff)
    return float(value.mean()), grad


def _sample_triplets(b: int, count: int, rng: np.random.Generator) -> np.ndarray:
    rows = []
    need = count
    while need > 0:
        cand = rng.integers(0, b, size=(2 * need, 3))
        ok = (
            (cand[:, 0] != cand[:, 1])
            & (cand[:, 0] != cand[:, 2])
            & (cand[:, 1] != cand[:, 2])
        )
        cand = cand[ok][:need]
        rows.append(cand)
        need -= len(cand)
    return np.concatenate(rows)


def _full_triplets(b: int) -> np.ndarray:
    i, j, k = np.meshgrid(np.arange(b), np.arange(b), np.arange(b), indexing="ij")
    flat = np.stack([i.ravel(), j.ravel(), k.ravel()], axis=1)
    keep = (flat[:, 0] < flat[:, 1]) & (flat[:, 1] < flat[:, 2])
    return flat[keep]


def continuity_loss(
    embeds: np.ndarray,
    labels: np.ndarray,
    cfg: LossConfig,
    rng: np.random.Generator | None = None,
    triplets: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """Triplet penalty aligning embedding distances with label gaps.

    For a triplet (anchor i, j, k) the term is phi((d_ij - d_ik) * s)
    where d are Euclidean embedding distances and s orders the label
    gaps |y_i-y_j| vs |y_i-y_k|.  Triplets whose label gaps tie are
    dropped.  When the full triplet count exceeds cfg.triplets_per_batch
    a seeded random sample of that size is used.
    """
    embeds = np.asarray(embeds, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    b = len(labels)
    if b < 3:
        raise BatchTooSmall("triplet loss needs at least 3 rows")
    if triplets is None:
        if math.comb(b, 3) <= cfg.triplets_per_batch:
            triplets = _full_triplets(b)
        else:
            triplets = _sample_triplets(
                b, cfg.triplets_per_batch, rng or np.random.default_rng(0)
            )
    ti, tj, tk = triplets[:, 0], triplets[:, 1], triplets[:, 2]
    grad = np.zeros_like(embeds)

    sign = np.sign(np.abs(labels[ti] - labels[tj]) - np.abs(labels[ti] - labels[tk]))
    keep = sign != 0
    ti, tj, tk, sign = ti[keep], tj[keep], tk[keep], sign[keep]
    if len(ti) == 0:
        return 0.0, grad

    vij = embeds[ti] - embeds[tj]
    vik = embeds[ti] - embeds[tk]
    dij = np.linalg.norm(vij, axis=1)
    dik = np.linalg.norm(vik, axis=1)
    z = (dij - dik) * sign
    value, deriv = _phi(z, cfg)
    m = len(ti)
    # unit direction vectors, zero where the distance is zero
    with np.errstate(invalid="ignore", divide="ignore"):
        uij = np.where(dij[:, None] > 0, vij / dij[:, None], 0.0)
        uik = np.where(dik[:, None] > 0, vik / dik[:, None], 0.0)
    coeff = (deriv * sign / m)[:, None]
    np.add.at(grad, ti, coeff * (uij - uik))
    np.add.at(grad, tj, -coeff * uij)
    np.add.at(grad, tk, coeff * uik)
    return float(value.mean()), grad


def combined_loss(
    scores: np.ndarray,
    embeds: np.ndarray,
    labels: np.ndarray,
    cfg: LossConfig,
    rng: np.random.Generator | None = None,
    triplets: np.ndarray | None = None,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Pairwise term plus weighted triplet term; grads for both heads."""
    v1, dscores = pairwise_rank_loss(scores, labels, cfg)
    v2, dembeds = continuity_loss(embeds, labels, cfg, rng=rng, triplets=triplets)
    w = cfg.continuity_weight
    return v1 + w * v2, dscores, w * dembeds


def mse_loss(scores: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if len(scores) < 1:
        raise BatchTooSmall("mse needs at least 1 row")
    diff = scores - labels
    return float(np.mean(diff * diff)), 2.0 * diff / len(scores)


@dataclass(frozen=True)
class AdmissibilityCheckConfig:
    c_x: float = 1.0  # input coordinate bound
    c_f: float = 2.0  # bound on the sampled networks' weight norms
    trials: int = 100_000
    hidden: int = 8
    input_dim: int = 4
    margin: float = 0.1

    def __post_init__(self):
        if self.c_x <= 0 or self.c_f <= 0:
            raise ValueError("bounds must be positive")


def admissibility_probe(cfg: AdmissibilityCheckConfig, seed: int = 0) -> float:
    """Empirical Lipschitz ratio of the pairwise hinge in its predictions.

    Draws pairs of two-layer ReLU networks f1, f2 and sample pairs, then
    measures |loss(f1) - loss(f2)| / (|f1(x)-f2(x)| + |f1(x')-f2(x')|).
    A ratio bounded by 1 means changing the predictor changes the loss
    no faster than it changes the predictions themselves.
    """
    rng = np.random.default_rng(seed)
    t, h, d = cfg.trials, cfg.hidden, cfg.input_dim

    def sample_net():
        w1 = rng.standard_normal((t, h, d))
        w2 = rng.standard_normal((t, h))
        # scale each net so ||w2|| * ||W1||_F lands uniformly in (0, c_f]
        norm = np.linalg.norm(w1.reshape(t, -1), axis=1) * np.linalg.norm(w2, axis=1)
        target = cfg.c_f * rng.uniform(0.05, 1.0, size=t)
        scale = np.sqrt(target / norm)
        return w1 * scale[:, None, None], w2 * scale[:, None]

    def apply(net, x):
        w1, w2 = net
        hidden = np.maximum(np.einsum("thd,td->th", w1, x), 0.0)
        return np.einsum("th,th->t", w2, hidden)

    f1 = sample_net()
    f2 = sample_net()
    x = rng.uniform(-cfg.c_x, cfg.c_x, size=(t, d))
    xp = rng.uniform(-cfg.c_x, cfg.c_x, size=(t, d))
    y = rng.uniform(0.0, 1.0, size=t)
    yp = rng.uniform(0.0, 1.0, size=t)
    sign = np.sign(y - yp)

    def pair_loss(net):
        z = (apply(net, x) - apply(net, xp)) * sign
        return np.maximum(cfg.margin - z, 0.0)

    numer = np.abs(pair_loss(f1) - pair_loss(f2))
    denom = np.abs(apply(f1, x) - apply(f2, x)) + np.abs(apply(f1, xp) - apply(f2, xp))
    ok = denom > 0
    if not ok.any():
        return 0.0
    return float((numer[ok] / denom[ok]).max())
