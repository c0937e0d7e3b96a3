"""Ranking-agreement metrics.

The headline number is Kendall's Tau computed as
2 * concordant / C(n, 2) - 1 with exact pair counting; tied pairs (in
either vector) are excluded from the concordant count, so heavy ties pull
the value toward -1 rather than inflating it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RenasError


class LengthMismatch(RenasError):
    pass


class TooFew(RenasError):
    pass


@dataclass(frozen=True)
class RankReport:
    ktau: float
    n: int
    concordant: int
    discordant: int
    tied: int

    def as_dict(self) -> dict:
        return {
            "ktau": self.ktau,
            "n": self.n,
            "concordant": self.concordant,
            "discordant": self.discordant,
            "tied": self.tied,
        }


def kendall_tau(pred, truth, chunk: int = 512) -> RankReport:
    """Exact O(n^2) pair count, chunked to bound memory."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise LengthMismatch(f"shapes {pred.shape} vs {truth.shape}")
    n = len(pred)
    if n < 2:
        raise TooFew("need at least 2 samples")
    concordant = discordant = tied = 0
    idx = np.arange(n)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        sp = np.sign(pred[start:stop, None] - pred[None, :])
        st = np.sign(truth[start:stop, None] - truth[None, :])
        upper = idx[None, :] > idx[start:stop, None]
        prod = sp * st
        concordant += int(np.count_nonzero(upper & (prod > 0)))
        discordant += int(np.count_nonzero(upper & (prod < 0)))
        tied += int(np.count_nonzero(upper & (prod == 0)))
    total = n * (n - 1) // 2
    ktau = 2.0 * concordant / total - 1.0
    return RankReport(ktau=ktau, n=n, concordant=concordant, discordant=discordant, tied=tied)


def rank_of(value: float, population) -> float:
    """Percent of the population strictly better (higher) than value."""
    population = np.asarray(population, dtype=np.float64)
    if population.size == 0:
        raise TooFew("empty population")
    return 100.0 * float(np.count_nonzero(population > value)) / population.size
