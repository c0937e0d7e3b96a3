"""Record storage, splits, synthetic labels, and sub-space statistics.

Records pair a canonical cell with a validation accuracy (and optionally
a test accuracy).  Labels for desk-scale work come from a deterministic
surrogate formula whose trends follow the benchmark statistics: shorter
input-output distance is better, 3x3 convs help, pooling hurts, plus a
small stable hash noise so no two cells tie exactly.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import cellgraph
from .cellgraph import CellGraph, OP_TOKENS, TOKEN_OPS
from .costmodel import Skeleton, network_costs
from .errors import IoError, RenasError

SOURCES = ("real", "synthetic")


class EmptyStore(RenasError):
    pass


class BadFraction(RenasError):
    pass


class SchemaError(RenasError):
    pass


@dataclass(frozen=True)
class ArchRecord:
    cell: CellGraph
    val_acc: float
    test_acc: float | None
    source: str
    id: str

    @classmethod
    def make(
        cls,
        cell: CellGraph,
        val_acc: float,
        test_acc: float | None = None,
        source: str = "synthetic",
    ) -> "ArchRecord":
        cell = cellgraph.canonicalize(cell)
        for name, acc in (("val_acc", val_acc), ("test_acc", test_acc)):
            if acc is not None and not 0.0 <= acc <= 1.0:
                raise SchemaError(f"{name} {acc} outside [0, 1]")
        if source not in SOURCES:
            raise SchemaError(f"source must be one of {SOURCES}")
        return cls(
            cell=cell,
            val_acc=float(val_acc),
            test_acc=None if test_acc is None else float(test_acc),
            source=source,
            id=cellgraph.cell_id(cell),
        )


@dataclass(frozen=True)
class SurrogateConfig:
    base: float = 0.92
    dist_penalty: float = 0.012  # per io-distance step beyond 1
    conv3_bonus: float = 0.004
    pool_penalty: float = 0.002
    noise_amp: float = 0.005
    clamp_lo: float = 0.5
    clamp_hi: float = 0.95


def _hash_noise(g: CellGraph) -> float:
    """Stable noise in [-1, 1) from the canonical cell text."""
    digest = hashlib.sha256(g.to_text().encode("ascii")).digest()
    u = int.from_bytes(digest[:8], "big") >> 12  # top 52 bits
    return 2.0 * (u / float(1 << 52)) - 1.0


def surrogate_label(g: CellGraph, cfg: SurrogateConfig = SurrogateConfig()) -> float:
    g = cellgraph.canonicalize(g)
    conv3, _, pool = cellgraph.op_census(g)
    label = (
        cfg.base
        - cfg.dist_penalty * (cellgraph.io_distance(g) - 1)
        + cfg.conv3_bonus * conv3
        - cfg.pool_penalty * pool
        + cfg.noise_amp * _hash_noise(g)
    )
    return min(max(label, cfg.clamp_lo), cfg.clamp_hi)


def sample_cells(count: int, seed: int, max_nodes: int = 7) -> list[CellGraph]:
    """Distinct random valid cells, canonical, deterministic per seed."""
    rng = random.Random(seed)
    seen: dict[str, CellGraph] = {}
    attempts = 0
    limit = 400 * count + 10_000
    while len(seen) < count:
        attempts += 1
        if attempts > limit:
            raise RenasError(
                f"could not find {count} distinct cells with max_nodes={max_nodes}"
            )
        n = rng.randint(2, max_nodes)
        adj = [[0] * n for _ in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                if rng.random() < 0.5:
                    adj[i][j] = 1
        ops = (
            [cellgraph.INPUT]
            + [rng.choice(cellgraph.INTERIOR_OPS) for _ in range(n - 2)]
            + [cellgraph.OUTPUT]
        )
        try:
            g = cellgraph.validate(adj, ops)
        except RenasError:
            continue
        seen.setdefault(cellgraph.cell_id(g), g)
    return list(seen.values())[:count]


def synthetic_store(
    cells: Iterable[CellGraph], cfg: SurrogateConfig = SurrogateConfig()
) -> list[ArchRecord]:
    return [
        ArchRecord.make(g, surrogate_label(g, cfg), source="synthetic") for g in cells
    ]


def _network_totals(g: CellGraph, sk: Skeleton) -> tuple[float, float]:
    costs = network_costs(g, sk)
    return (
        sum(float(f.sum()) for f, _ in costs),
        sum(float(p.sum()) for _, p in costs),
    )


def split(
    records: Sequence[ArchRecord],
    fraction: float,
    strategy: str = "random",
    seed: int = 0,
    sk: Skeleton | None = None,
) -> tuple[list[ArchRecord], list[ArchRecord]]:
    """Partition into (train, eval).

    random: seeded shuffle prefix.  by_params / by_flops: sort by the
    total network cost, then pick evenly strided indices so the training
    set covers the whole cost range.
    """
    n = len(records)
    if n == 0:
        raise EmptyStore("no records to split")
    if not 0.0 < fraction < 1.0:
        raise BadFraction(f"fraction {fraction} outside (0, 1)")
    if n < 2:
        raise EmptyStore("need at least 2 records to split")
    k = min(max(round(n * fraction), 1), n - 1)

    if strategy == "random":
        order = list(range(n))
        random.Random(seed).shuffle(order)
        picked = sorted(order[:k])
    elif strategy in ("by_params", "by_flops"):
        sk = sk or Skeleton()
        totals = [_network_totals(r.cell, sk) for r in records]
        key = 1 if strategy == "by_params" else 0
        order = sorted(range(n), key=lambda idx: (totals[idx][key], records[idx].id))
        picked = sorted(order[i * n // k] for i in range(k))
    else:
        raise ValueError(f"unknown split strategy: {strategy}")

    chosen = set(picked)
    train = [records[i] for i in picked]
    eval_ = [records[i] for i in range(n) if i not in chosen]
    return train, eval_


def analyze_subspaces(records: Sequence[ArchRecord]) -> list[dict]:
    """Count / best / mean val_acc per (has 3x3 conv, io distance) group.

    Accuracies are reported as percentages rounded to two decimals; empty
    groups report None.
    """
    if not records:
        raise EmptyStore("no records to analyze")
    groups: dict[tuple[bool, int], list[float]] = {}
    for r in records:
        conv3 = cellgraph.op_census(r.cell)[0] > 0
        dist = cellgraph.io_distance(r.cell)
        groups.setdefault((conv3, dist), []).append(r.val_acc)
    rows = []
    for conv3 in (True, False):
        for dist in range(1, 7):
            accs = groups.get((conv3, dist), [])
            rows.append(
                {
                    "has_conv3": conv3,
                    "io_distance": dist,
                    "count": len(accs),
                    "best_acc": round(100 * max(accs), 2) if accs else None,
                    "mean_acc": round(100 * math.fsum(accs) / len(accs), 2) if accs else None,
                }
            )
    return rows


def _record_to_obj(r: ArchRecord) -> dict:
    obj = {
        "id": r.id,
        "n": r.cell.n,
        "adj": ["".join(str(v) for v in row) for row in r.cell.adj],
        "ops": [OP_TOKENS[op] for op in r.cell.ops],
        "val_acc": r.val_acc,
        "source": r.source,
    }
    if r.test_acc is not None:
        obj["test_acc"] = r.test_acc
    return obj


_ALLOWED_KEYS = {"id", "n", "adj", "ops", "val_acc", "test_acc", "source"}


def _obj_to_record(obj: dict, where: str) -> ArchRecord:
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: record must be an object")
    extra = set(obj) - _ALLOWED_KEYS
    if extra:
        raise SchemaError(f"{where}: unknown keys {sorted(extra)}")
    try:
        n = int(obj["n"])
        adj = [[int(ch) for ch in row] for row in obj["adj"]]
        ops = [TOKEN_OPS[tok] for tok in obj["ops"]]
        val_acc = float(obj["val_acc"])
        test_acc = float(obj["test_acc"]) if "test_acc" in obj else None
        source = obj["source"]
        stored_id = obj["id"]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: {exc}") from exc
    if len(adj) != n:
        raise SchemaError(f"{where}: adjacency has {len(adj)} rows for n={n}")
    try:
        cell = cellgraph.validate(adj, ops)
        record = ArchRecord.make(cell, val_acc, test_acc, source)
    except RenasError as exc:
        raise SchemaError(f"{where}: {exc}") from exc
    if record.id != stored_id:
        raise SchemaError(
            f"{where}: stored id {stored_id} does not match canonical form {record.id}"
        )
    return record


def save_jsonl(records: Iterable[ArchRecord], path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for r in records:
                fh.write(json.dumps(_record_to_obj(r), sort_keys=True))
                fh.write("\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc


def load_jsonl(path: str) -> list[ArchRecord]:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    records = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        where = f"{path}:{lineno}"
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{where}: invalid JSON ({exc})") from exc
        records.append(_obj_to_record(obj, where))
    return records
