"""DAG cells of a five-operation search space.

A cell is a small directed acyclic graph: one INPUT node, one OUTPUT node
and up to five interior operation nodes, limited to 7 nodes and 9 edges.
Cells are stored in a canonical node order (see :func:`canonicalize`) so
that structurally identical descriptions compare equal, and every stored
adjacency matrix is strictly upper triangular.
"""

from __future__ import annotations

import hashlib
import itertools
import random
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import RenasError

INPUT = 1
CONV3X3 = 2
CONV1X1 = 3
MAXPOOL3X3 = 4
OUTPUT = 5

OP_TOKENS = {
    INPUT: "INPUT",
    CONV3X3: "CONV3X3",
    CONV1X1: "CONV1X1",
    MAXPOOL3X3: "MAXPOOL3X3",
    OUTPUT: "OUTPUT",
}
TOKEN_OPS = {tok: op for op, tok in OP_TOKENS.items()}
INTERIOR_OPS = (CONV3X3, CONV1X1, MAXPOOL3X3)

MAX_NODES = 7
MAX_EDGES = 9


class CellError(RenasError):
    """Base class for invalid cell descriptions."""


class CycleDetected(CellError):
    pass


class TooManyEdges(CellError):
    pass


class TooManyNodes(CellError):
    pass


class MissingTerminal(CellError):
    pass


class Disconnected(CellError):
    pass


@dataclass(frozen=True)
class CellGraph:
    """An immutable cell: node count, adjacency rows and node operations.

    ``adj[i][j] == 1`` means an edge from node i to node j.  Node 0 is the
    INPUT, node ``n - 1`` the OUTPUT.
    """

    n: int
    adj: tuple[tuple[int, ...], ...]
    ops: tuple[int, ...]

    @property
    def edge_count(self) -> int:
        return sum(sum(row) for row in self.adj)

    def to_text(self) -> str:
        """Serialize: node count, 0/1 adjacency rows, comma-separated ops."""
        lines = [str(self.n)]
        lines.extend("".join(str(v) for v in row) for row in self.adj)
        lines.append(",".join(OP_TOKENS[op] for op in self.ops))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CellGraph":
        """Parse the text form and return the validated canonical cell."""
        lines = [ln.strip() for ln in text.strip().splitlines()]
        if not lines:
            raise ValueError("empty cell text")
        try:
            n = int(lines[0])
        except ValueError as exc:
            raise ValueError(f"bad node count line: {lines[0]!r}") from exc
        if len(lines) != n + 2:
            raise ValueError(f"expected {n + 2} lines, got {len(lines)}")
        adj = []
        for row in lines[1 : n + 1]:
            if len(row) != n or set(row) - {"0", "1"}:
                raise ValueError(f"bad adjacency row: {row!r}")
            adj.append([int(ch) for ch in row])
        ops = []
        for tok in lines[n + 1].split(","):
            tok = tok.strip()
            if tok not in TOKEN_OPS:
                raise ValueError(f"unknown op token: {tok!r}")
            ops.append(TOKEN_OPS[tok])
        return validate(adj, ops)


def cell_id(g: CellGraph) -> str:
    """Stable 64-bit hex id of the canonical form of ``g``."""
    text = canonicalize(g).to_text()
    return hashlib.sha256(text.encode("ascii")).hexdigest()[:16]


def _check_matrix(raw_adj: Sequence[Sequence[int]]) -> list[list[int]]:
    n = len(raw_adj)
    adj = []
    for row in raw_adj:
        row = list(row)
        if len(row) != n:
            raise ValueError("adjacency matrix must be square")
        if any(v not in (0, 1) for v in row):
            raise ValueError("adjacency entries must be 0 or 1")
        adj.append([int(v) for v in row])
    return adj


def _has_cycle(adj: list[list[int]]) -> bool:
    n = len(adj)
    indeg = [sum(adj[i][j] for i in range(n)) for j in range(n)]
    queue = deque(v for v in range(n) if indeg[v] == 0)
    seen = 0
    while queue:
        u = queue.popleft()
        seen += 1
        for v in range(n):
            if adj[u][v]:
                indeg[v] -= 1
                if indeg[v] == 0:
                    queue.append(v)
    return seen != n


def _reach(adj: list[list[int]], start: int, forward: bool) -> set[int]:
    n = len(adj)
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in range(n):
            hit = adj[u][v] if forward else adj[v][u]
            if hit and v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


def _longest_depths(adj: list[list[int]]) -> list[int]:
    # Longest-path distance from node 0.  Any edge strictly increases it,
    # so equal-depth nodes are never adjacent and depth order is a
    # topological order.
    n = len(adj)
    indeg = [sum(adj[i][j] for i in range(n)) for j in range(n)]
    depth = [0] * n
    queue = deque(v for v in range(n) if indeg[v] == 0)
    while queue:
        u = queue.popleft()
        for v in range(n):
            if adj[u][v]:
                depth[v] = max(depth[v], depth[u] + 1)
                indeg[v] -= 1
                if indeg[v] == 0:
                    queue.append(v)
    return depth


def _permute(
    adj: list[list[int]], ops: list[int], order: Sequence[int]
) -> tuple[tuple[tuple[int, ...], ...], tuple[int, ...]]:
    # order[k] = original index of the node placed at position k
    n = len(order)
    new_adj = tuple(
        tuple(adj[order[i]][order[j]] for j in range(n)) for i in range(n)
    )
    new_ops = tuple(ops[i] for i in order)
    return new_adj, new_ops


def _canonical_form(adj: list[list[int]], ops: list[int]) -> CellGraph:
    """Reorder nodes into the canonical order.

    Nodes are sorted by depth (longest path from INPUT), then by op id.
    Nodes that tie on both are ordered by the permutation of the tied
    group that makes the flattened adjacency matrix lexicographically
    smallest, which makes the result independent of the input node order.
    """
    n = len(adj)
    depth = _longest_depths(adj)
    base = sorted(range(n), key=lambda v: (depth[v], ops[v], v))
    # group positions whose (depth, op) key ties
    groups: list[list[int]] = []
    pos = 0
    while pos < n:
        end = pos
        key = (depth[base[pos]], ops[base[pos]])
        while end < n and (depth[base[end]], ops[base[end]]) == key:
            end += 1
        groups.append(list(range(pos, end)))
        pos = end
    ambiguous = [grp for grp in groups if len(grp) > 1]
    if not ambiguous:
        new_adj, new_ops = _permute(adj, ops, base)
        return CellGraph(n=n, adj=new_adj, ops=new_ops)

    best: tuple | None = None
    best_adj = None
    best_ops = None
    for combo in itertools.product(*(itertools.permutations(grp) for grp in ambiguous)):
        order = list(base)
        for grp, perm in zip(ambiguous, combo):
            for slot, src in zip(grp, perm):
                order[slot] = base[src]
        cand_adj, cand_ops = _permute(adj, ops, order)
        flat = tuple(v for row in cand_adj for v in row)
        if best is None or flat < best:
            best = flat
            best_adj, best_ops = cand_adj, cand_ops
    return CellGraph(n=n, adj=best_adj, ops=best_ops)


def validate(raw_adj: Sequence[Sequence[int]], raw_ops: Sequence[int | str]) -> CellGraph:
    """Check a raw cell description and return its canonical form.

    Nodes that lie on no INPUT-to-OUTPUT path are pruned before the
    canonical form is built.

    Raises:
        TooManyNodes / TooManyEdges: size limits exceeded (8 nodes or 10
            edges are rejected, 7 and 9 accepted).
        MissingTerminal: INPUT/OUTPUT absent, duplicated or misplaced.
        CycleDetected: the graph is not acyclic.
        Disconnected: no path from INPUT to OUTPUT.
    """
    adj = _check_matrix(raw_adj)
    n = len(adj)
    if n > MAX_NODES:
        raise TooManyNodes(f"{n} nodes exceeds limit of {MAX_NODES}")
    if n < 2:
        raise MissingTerminal("a cell needs at least INPUT and OUTPUT nodes")
    ops = [TOKEN_OPS[op] if isinstance(op, str) else int(op) for op in raw_ops]
    if len(ops) != n:
        raise ValueError("ops vector length must match adjacency size")
    if any(op not in OP_TOKENS for op in ops):
        raise ValueError(f"op ids must be in {sorted(OP_TOKENS)}")
    if ops[0] != INPUT or ops.count(INPUT) != 1:
        raise MissingTerminal("INPUT must appear exactly once, as node 0")
    if ops[-1] != OUTPUT or ops.count(OUTPUT) != 1:
        raise MissingTerminal("OUTPUT must appear exactly once, as the last node")
    edges = sum(sum(row) for row in adj)
    if edges > MAX_EDGES:
        raise TooManyEdges(f"{edges} edges exceeds limit of {MAX_EDGES}")
    if any(adj[i][i] for i in range(n)):
        raise CycleDetected("self loop")
    if _has_cycle(adj):
        raise CycleDetected("adjacency matrix contains a cycle")

    keep = sorted(_reach(adj, 0, forward=True) & _reach(adj, n - 1, forward=False))
    if 0 not in keep or (n - 1) not in keep:
        raise Disconnected("no path from INPUT to OUTPUT")
    if len(keep) != n:
        adj = [[adj[i][j] for j in keep] for i in keep]
        ops = [ops[i] for i in keep]
    return _canonical_form(adj, ops)


def canonicalize(g: CellGraph) -> CellGraph:
    """Return the canonical reordering of a valid cell (idempotent)."""
    return _canonical_form([list(r) for r in g.adj], list(g.ops))


@dataclass(frozen=True)
class DepthProfile:
    """Per-node depth used for the canonical order.

    ``depth[v]`` is the longest-path edge distance from INPUT to v; it is
    0 for INPUT, nondecreasing along the canonical order, and maximal at
    OUTPUT.
    """

    depth: tuple[int, ...]


def depth_profile(g: CellGraph) -> DepthProfile:
    return DepthProfile(depth=tuple(_longest_depths([list(r) for r in g.adj])))


def augmentations(g: CellGraph, cap: int = 24) -> list[CellGraph]:
    """All reorderings of ``g`` that permute nodes of equal depth.

    Equal-depth nodes are never adjacent, so every returned graph is a
    valid alternative representation of the same architecture.  When the
    full count exceeds ``cap`` a deterministic sample (seeded from the
    cell id) of that size is returned.  ``g`` itself is always included.
    """
    depth = _longest_depths([list(r) for r in g.adj])
    groups: list[list[int]] = []
    for d in sorted(set(depth)):
        members = [v for v in range(g.n) if depth[v] == d]
        if len(members) > 1:
            groups.append(members)
    if not groups:
        return [g]

    adj = [list(r) for r in g.adj]
    ops = list(g.ops)
    variants: list[CellGraph] = []
    for combo in itertools.product(*(itertools.permutations(grp) for grp in groups)):
        order = list(range(g.n))
        for grp, perm in zip(groups, combo):
            for slot, src in zip(grp, perm):
                order[slot] = src
        new_adj, new_ops = _permute(adj, ops, order)
        variants.append(CellGraph(n=g.n, adj=new_adj, ops=new_ops))

    if len(variants) > cap:
        rng = random.Random(int(cell_id(g), 16))
        idx = variants.index(g)
        rest = variants[:idx] + variants[idx + 1 :]
        rng.shuffle(rest)
        variants = [g] + rest[: cap - 1]
    return variants


def io_distance(g: CellGraph) -> int:
    """Shortest-path edge count from INPUT to OUTPUT (1 for a direct edge)."""
    dist = {0: 0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        if u == g.n - 1:
            return dist[u]
        for v in range(g.n):
            if g.adj[u][v] and v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    raise Disconnected("no path from INPUT to OUTPUT")


def op_census(g: CellGraph) -> tuple[int, int, int]:
    """Counts of (3x3 conv, 1x1 conv, 3x3 max-pool) interior nodes."""
    interior = g.ops[1:-1]
    return (
        sum(1 for op in interior if op == CONV3X3),
        sum(1 for op in interior if op == CONV1X1),
        sum(1 for op in interior if op == MAXPOOL3X3),
    )


def interior_permutations(g: CellGraph) -> Iterable[tuple[list[list[int]], list[int]]]:
    """Yield every relabeling of interior nodes as raw (adjacency, ops) pairs."""
    interior = list(range(1, g.n - 1))
    adj = [list(r) for r in g.adj]
    ops = list(g.ops)
    for perm in itertools.permutations(interior):
        order = [0] + list(perm) + [g.n - 1]
        new_adj, new_ops = _permute(adj, ops, order)
        yield [list(r) for r in new_adj], list(new_ops)
