"""Per-node FLOP and parameter counts under a fixed macro skeleton.

Candidate cells are stacked 9 times (3 stacks of 3), with spatial size
halved and channel width doubled between stacks.  Every interior node of
a cell runs at its slot's channel width; costs are multiply-accumulate
counts with no bias or norm-layer terms, so a conv k x k costs k^2 * c^2
weights and that many MACs per output pixel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cellgraph import CONV1X1, CONV3X3, MAXPOOL3X3, CellGraph
from .errors import RenasError


class InvalidSlot(RenasError):
    pass


@dataclass(frozen=True)
class Skeleton:
    """Macro architecture: stem + stacks of cell slots with downsampling."""

    input_hw: int = 32
    stem_channels: int = 128
    stacks: int = 3
    cells_per_stack: int = 3

    def __post_init__(self):
        if min(self.input_hw, self.stem_channels, self.stacks, self.cells_per_stack) < 1:
            raise ValueError("skeleton dimensions must be positive")
        if self.input_hw % (1 << (self.stacks - 1)) != 0:
            raise ValueError("input_hw must survive the per-stack halving")

    @property
    def num_slots(self) -> int:
        return self.stacks * self.cells_per_stack

    def slot_side(self, slot: int) -> int:
        self._check(slot)
        return self.input_hw >> (slot // self.cells_per_stack)

    def slot_channels(self, slot: int) -> int:
        self._check(slot)
        return self.stem_channels << (slot // self.cells_per_stack)

    def _check(self, slot: int) -> None:
        if not 0 <= slot < self.num_slots:
            raise InvalidSlot(f"slot {slot} outside 0..{self.num_slots - 1}")


def node_costs(op: int, channels: int, side: int) -> tuple[float, float]:
    """(flops, params) of one node at the given width and spatial side."""
    if op == CONV3X3:
        params = 9 * channels * channels
        return float(params * side * side), float(params)
    if op == CONV1X1:
        params = channels * channels
        return float(params * side * side), float(params)
    if op == MAXPOOL3X3:
        return float(9 * channels * side * side), 0.0
    return 0.0, 0.0  # INPUT / OUTPUT


def cell_costs(g: CellGraph, slot: int, sk: Skeleton) -> tuple[np.ndarray, np.ndarray]:
    """Per-node (flop vector, param vector) for the cell placed at a slot."""
    side = sk.slot_side(slot)
    channels = sk.slot_channels(slot)
    flops = np.zeros(g.n, dtype=np.float64)
    params = np.zeros(g.n, dtype=np.float64)
    for v, op in enumerate(g.ops):
        flops[v], params[v] = node_costs(op, channels, side)
    return flops, params


def network_costs(g: CellGraph, sk: Skeleton) -> list[tuple[np.ndarray, np.ndarray]]:
    """cell_costs for every slot, in slot order."""
    return [cell_costs(g, slot, sk) for slot in range(sk.num_slots)]
