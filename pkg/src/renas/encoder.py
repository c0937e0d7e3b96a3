"""Fixed-shape feature tensors for cells.

Every cell becomes a 19x7x7 array: one channel for node types and, for
each of the 9 skeleton slots, one FLOP channel and one parameter channel.
Cells smaller than 7 nodes are zero-padded at the penultimate row/column
so INPUT always sits at index 0 and OUTPUT at index 6.  A per-node vector
v turns into a matrix by writing v[j] at every adjacency 1-entry (i, j):
each edge carries the cost of the node it feeds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cellgraph import CellGraph
from .errors import RenasError

NUM_CHANNELS = 19
GRID = 7


class CostShapeMismatch(RenasError):
    pass


class EmptyInput(RenasError):
    pass


@dataclass(frozen=True)
class NormScaler:
    """Per-channel-group absolute maxima fitted on training tensors."""

    type_max: float
    flop_max: float
    param_max: float

    def as_dict(self) -> dict:
        return {
            "type_max": self.type_max,
            "flop_max": self.flop_max,
            "param_max": self.param_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormScaler":
        return cls(
            type_max=float(d["type_max"]),
            flop_max=float(d["flop_max"]),
            param_max=float(d["param_max"]),
        )


def _pad_vector(vec: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(GRID, dtype=np.float64)
    out[: n - 1] = vec[: n - 1]
    out[GRID - 1] = vec[n - 1]
    return out


def pad7(g: CellGraph) -> tuple[np.ndarray, np.ndarray, tuple[int, ...]]:
    """Embed the adjacency into 7x7 and the type vector into length 7.

    Zero rows/columns are inserted at the penultimate index, so nodes
    0..n-2 keep their positions and OUTPUT moves to index 6.  Returns the
    padded adjacency, padded type vector and the tuple of padding indices.
    """
    n = g.n
    a7 = np.zeros((GRID, GRID), dtype=np.int64)
    adj = np.array(g.adj, dtype=np.int64)
    a7[: n - 1, : n - 1] = adj[: n - 1, : n - 1]
    a7[: n - 1, GRID - 1] = adj[: n - 1, n - 1]
    a7[GRID - 1, : n - 1] = adj[n - 1, : n - 1]
    a7[GRID - 1, GRID - 1] = adj[n - 1, n - 1]
    t7 = _pad_vector(np.array(g.ops, dtype=np.float64), n).astype(np.int64)
    return a7, t7, tuple(range(n - 1, GRID - 1))


def encode(
    g: CellGraph,
    costs: Sequence[tuple[np.ndarray, np.ndarray]],
    scaler: NormScaler | None = None,
) -> np.ndarray:
    """Build the 19x7x7 tensor from a cell and its 9 per-slot cost pairs."""
    if len(costs) != NUM_CHANNELS // 2:
        raise CostShapeMismatch(f"expected 9 cost pairs, got {len(costs)}")
    a7, t7, _ = pad7(g)
    mask = a7.astype(np.float64)
    out = np.zeros((NUM_CHANNELS, GRID, GRID), dtype=np.float64)
    out[0] = t7.astype(np.float64)[None, :] * mask
    for slot, (f, p) in enumerate(costs):
        if len(f) != g.n or len(p) != g.n:
            raise CostShapeMismatch(
                f"slot {slot}: cost vectors of length {len(f)}/{len(p)} for {g.n} nodes"
            )
        out[1 + slot] = _pad_vector(np.asarray(f, dtype=np.float64), g.n)[None, :] * mask
        out[10 + slot] = _pad_vector(np.asarray(p, dtype=np.float64), g.n)[None, :] * mask
    if scaler is not None:
        out = apply_scaler(out, scaler)
    return out


def apply_scaler(tensor: np.ndarray, scaler: NormScaler) -> np.ndarray:
    out = tensor.astype(np.float64).copy()
    out[0] /= scaler.type_max
    out[1:10] /= scaler.flop_max
    out[10:19] /= scaler.param_max
    return out


def fit_scaler(tensors: Sequence[np.ndarray]) -> NormScaler:
    """Group absolute maxima over a training set; zero maxima become 1."""
    if len(tensors) == 0:
        raise EmptyInput("cannot fit a scaler on an empty tensor list")
    type_max = flop_max = param_max = 0.0
    for t in tensors:
        a = np.abs(np.asarray(t, dtype=np.float64))
        type_max = max(type_max, float(a[0].max()))
        flop_max = max(flop_max, float(a[1:10].max()))
        param_max = max(param_max, float(a[10:19].max()))
    return NormScaler(
        type_max=type_max or 1.0,
        flop_max=flop_max or 1.0,
        param_max=param_max or 1.0,
    )
