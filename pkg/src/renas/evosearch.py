"""Evolutionary search over cells, scored by a trained predictor.

A genome is a fixed-size template: one bit per upper-triangular edge slot
of a 7-node graph plus one op gene per interior node.  Decoding validates
and prunes, so phenotypes are always canonical cells; genomes that break
the edge budget are repaired by dropping random edges, and ones that
disconnect are resampled.  Selection, crossover and mutation are applied
independently per individual each generation, in that order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import cellgraph, pipeline
from .cellgraph import CellGraph, INTERIOR_OPS
from .errors import RenasError
from .tensornet import PredictorModel


class InvalidConfig(RenasError):
    pass


class TooLarge(RenasError):
    pass


@dataclass(frozen=True)
class EaConfig:
    generations: int = 500
    population: int = 64
    p_select: float = 0.5
    p_crossover: float = 0.3
    p_mutate: float = 0.2
    seed: int = 0
    top_k: int = 10
    tournament: int = 2
    max_nodes: int = 7

    def __post_init__(self):
        probs = (self.p_select, self.p_crossover, self.p_mutate)
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise InvalidConfig("probabilities must lie in [0, 1]")
        if self.population < 2:
            raise InvalidConfig("population must be >= 2")
        if self.generations < 0 or self.top_k < 1 or self.tournament < 1:
            raise InvalidConfig("generations >= 0, top_k >= 1, tournament >= 1")
        if not 2 <= self.max_nodes <= cellgraph.MAX_NODES:
            raise InvalidConfig(f"max_nodes must be in 2..{cellgraph.MAX_NODES}")


@dataclass
class _Genome:
    edges: np.ndarray  # C(max_nodes, 2) bits
    ops: np.ndarray  # max_nodes - 2 interior op ids


def _edge_slots(max_nodes: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(max_nodes) for j in range(i + 1, max_nodes)]


def _decode_raw(genome: _Genome, max_nodes: int) -> tuple[list[list[int]], list[int]]:
    adj = [[0] * max_nodes for _ in range(max_nodes)]
    for bit, (i, j) in zip(genome.edges, _edge_slots(max_nodes)):
        adj[i][j] = int(bit)
    ops = [cellgraph.INPUT, *(int(o) for o in genome.ops), cellgraph.OUTPUT]
    return adj, ops


def _random_genome(rng: np.random.Generator, max_nodes: int) -> _Genome:
    n_edges = max_nodes * (max_nodes - 1) // 2
    return _Genome(
        edges=rng.integers(0, 2, size=n_edges),
        ops=rng.choice(INTERIOR_OPS, size=max_nodes - 2),
    )


def _repair(genome: _Genome, rng: np.random.Generator, max_nodes: int) -> tuple[_Genome, CellGraph]:
    """Decode, dropping random edges / resampling until the cell is valid."""
    while True:
        over = int(genome.edges.sum()) - cellgraph.MAX_EDGES
        if over > 0:
            on = np.flatnonzero(genome.edges)
            drop = rng.choice(on, size=over, replace=False)
            edges = genome.edges.copy()
            edges[drop] = 0
            genome = _Genome(edges=edges, ops=genome.ops)
        try:
            cell = cellgraph.validate(*_decode_raw(genome, max_nodes))
        except RenasError:
            genome = _random_genome(rng, max_nodes)
            continue
        if cell.n == 2 and max_nodes > 2:
            genome = _random_genome(rng, max_nodes)  # escaped to the trivial cell
            continue
        return genome, cell


class _Scorer:
    """Predictor fitness with an id-keyed cache."""

    def __init__(self, model: PredictorModel):
        self.model = model
        self.cache: dict[str, float] = {}

    def __call__(self, cells: Sequence[CellGraph]) -> list[float]:
        ids = [cellgraph.cell_id(g) for g in cells]
        fresh = []
        fresh_ids = []
        for g, gid in zip(cells, ids):
            if gid not in self.cache and gid not in fresh_ids:
                fresh.append(g)
                fresh_ids.append(gid)
        if fresh:
            for gid, score in zip(fresh_ids, pipeline.score_cells(self.model, fresh)):
                self.cache[gid] = float(score)
        return [self.cache[gid] for gid in ids]


def ea_search(model: PredictorModel, cfg: EaConfig) -> list[tuple[CellGraph, float]]:
    """Generational EA; returns the deduplicated top_k by predictor score."""
    rng = np.random.default_rng(cfg.seed)
    scorer = _Scorer(model)
    genomes = []
    cells = []
    for _ in range(cfg.population):
        genome, cell = _repair(_random_genome(rng, cfg.max_nodes), rng, cfg.max_nodes)
        genomes.append(genome)
        cells.append(cell)

    hall: dict[str, tuple[CellGraph, float]] = {}

    def absorb(cs: Sequence[CellGraph], scores: Sequence[float]) -> None:
        for g, s in zip(cs, scores):
            hall.setdefault(cellgraph.cell_id(g), (g, s))

    fitness = scorer(cells)
    absorb(cells, fitness)

    for _ in range(cfg.generations):
        next_genomes = []
        next_cells = []
        for idx in range(cfg.population):
            genome = genomes[idx]
            if rng.random() < cfg.p_select:
                rivals = rng.integers(0, cfg.population, size=cfg.tournament)
                winner = max(rivals, key=lambda r: (fitness[r], -r))
                genome = genomes[winner]
            if rng.random() < cfg.p_crossover:
                mate = genomes[int(rng.integers(cfg.population))]
                edge_take = rng.integers(0, 2, size=len(genome.edges)).astype(bool)
                op_take = rng.integers(0, 2, size=len(genome.ops)).astype(bool)
                genome = _Genome(
                    edges=np.where(edge_take, genome.edges, mate.edges),
                    ops=np.where(op_take, genome.ops, mate.ops),
                )
            if rng.random() < cfg.p_mutate:
                edges = genome.edges.copy()
                ops = genome.ops.copy()
                locus = int(rng.integers(len(edges) + len(ops)))
                if locus < len(edges):
                    edges[locus] ^= 1
                else:
                    gene = locus - len(edges)
                    others = [op for op in INTERIOR_OPS if op != ops[gene]]
                    ops[gene] = others[int(rng.integers(len(others)))]
                genome = _Genome(edges=edges, ops=ops)
            genome, cell = _repair(
                _Genome(edges=genome.edges.copy(), ops=genome.ops.copy()),
                rng,
                cfg.max_nodes,
            )
            next_genomes.append(genome)
            next_cells.append(cell)
        genomes, cells = next_genomes, next_cells
        fitness = scorer(cells)
        absorb(cells, fitness)

    ranked = sorted(hall.items(), key=lambda kv: (-kv[1][1], kv[0]))
    return [entry for _, entry in ranked[: cfg.top_k]]


def exhaustive_search(
    model: PredictorModel, space: Iterable[CellGraph], top_k: int = 10
) -> list[tuple[CellGraph, float]]:
    """Score every cell; ranked result is independent of iteration order.

    Cells are scored in id order so the floating-point result cannot
    depend on how the caller happened to order the space.
    """
    by_id = {cellgraph.cell_id(g): g for g in space}
    ordered = sorted(by_id)
    cells = [by_id[i] for i in ordered]
    scores = pipeline.score_cells(model, cells)
    ranked = sorted(zip(ordered, cells, scores), key=lambda row: (-row[2], row[0]))
    return [(g, float(s)) for _, g, s in ranked[:top_k]]


def enumerate_space(max_nodes: int) -> list[CellGraph]:
    """Every distinct canonical cell with at most max_nodes nodes.

    Brute-force generate-and-validate; intentionally capped at 5 nodes
    where the raw candidate count is still tens of thousands.
    """
    if max_nodes > 5:
        raise TooLarge("exhaustive enumeration is limited to max_nodes <= 5")
    if max_nodes < 2:
        raise TooLarge("cells need at least 2 nodes")
    out: dict[str, CellGraph] = {}
    for n in range(2, max_nodes + 1):
        slots = _edge_slots(n)
        interior = n - 2
        op_choices = _op_assignments(interior)
        for mask in range(1 << len(slots)):
            adj = [[0] * n for _ in range(n)]
            for b, (i, j) in enumerate(slots):
                if mask >> b & 1:
                    adj[i][j] = 1
            for ops in op_choices:
                try:
                    g = cellgraph.validate(adj, [cellgraph.INPUT, *ops, cellgraph.OUTPUT])
                except RenasError:
                    continue
                if g.n != n:
                    continue  # pruned duplicate of a smaller cell
                out.setdefault(cellgraph.cell_id(g), g)
    return list(out.values())


def _op_assignments(interior: int) -> list[tuple[int, ...]]:
    if interior == 0:
        return [()]
    combos = [()]
    for _ in range(interior):
        combos = [(*c, op) for c in combos for op in INTERIOR_OPS]
    return combos
