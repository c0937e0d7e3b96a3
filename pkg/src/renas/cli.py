"""Command-line interface.

Subcommands: encode | train | eval | search | analyze | gen-synthetic.
Settings come from an INI config file plus flags, with flags winning.
Exit codes: 0 ok, 2 bad usage/config, 3 missing input file, 4 malformed
data, 5 unusable model file, 1 anything else.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys

from . import datastore, evosearch, pipeline, tensornet
from .cellgraph import CellGraph, OP_TOKENS, cell_id
from .costmodel import Skeleton
from .datastore import SchemaError
from .encoder import GRID, NUM_CHANNELS
from .errors import IoError, RenasError
from .metrics import TooFew
from .ranking import LossConfig
from .tensornet import CorruptFile, VersionMismatch

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_MISSING = 3
EXIT_SCHEMA = 4
EXIT_MODEL = 5


class BadConfig(RenasError):
    pass


class MissingData(RenasError):
    pass


class MissingModel(RenasError):
    pass


_CONFIG_SCHEMA = {
    "skeleton": {
        "input_hw": int,
        "stem_channels": int,
        "stacks": int,
        "cells_per_stack": int,
    },
    "loss": {
        "margin": float,
        "lambda": float,
        "phi": str,
        "triplets_per_batch": int,
        "drop_equal_labels": bool,
    },
    "training": {
        "epochs": int,
        "batch": int,
        "lr": float,
        "weight_decay": float,
        "seed": int,
        "augment": bool,
        "eval_every": int,
    },
    "paths": {
        "data": str,
        "eval_data": str,
        "model": str,
        "out": str,
        "log": str,
    },
}

_POSITIVE = {
    ("skeleton", "input_hw"),
    ("skeleton", "stem_channels"),
    ("skeleton", "stacks"),
    ("skeleton", "cells_per_stack"),
    ("loss", "margin"),
    ("loss", "triplets_per_batch"),
    ("training", "batch"),
    ("training", "lr"),
}


def load_config(path: str | None) -> dict[str, dict]:
    """Parse the INI file into typed sections, rejecting unknown keys."""
    cfg: dict[str, dict] = {name: {} for name in _CONFIG_SCHEMA}
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise MissingData(f"config file not found: {path}")
    for section in parser.sections():
        if section not in _CONFIG_SCHEMA:
            raise BadConfig(f"unknown config section [{section}]")
        for key, raw in parser[section].items():
            want = _CONFIG_SCHEMA[section].get(key)
            if want is None:
                raise BadConfig(f"unknown config key {section}.{key}")
            try:
                if want is bool:
                    value = parser[section].getboolean(key)
                else:
                    value = want(raw)
            except ValueError as exc:
                raise BadConfig(f"bad value for {section}.{key}: {raw!r}") from exc
            if (section, key) in _POSITIVE and value <= 0:
                raise BadConfig(f"{section}.{key} must be positive, got {raw!r}")
            if key in ("epochs", "seed", "eval_every", "weight_decay") and value < 0:
                raise BadConfig(f"{section}.{key} must be >= 0, got {raw!r}")
            cfg[section][key] = value
    return cfg


def _pick(flag, cfg: dict, key: str, default):
    if flag is not None:
        return flag
    return cfg.get(key, default)


def _skeleton(cfg: dict) -> Skeleton:
    try:
        return Skeleton(
            input_hw=cfg.get("input_hw", 32),
            stem_channels=cfg.get("stem_channels", 128),
            stacks=cfg.get("stacks", 3),
            cells_per_stack=cfg.get("cells_per_stack", 3),
        )
    except ValueError as exc:
        raise BadConfig(str(exc)) from exc


def _loss_config(args, cfg: dict) -> LossConfig:
    try:
        return LossConfig(
            margin=_pick(args.margin, cfg, "margin", 0.1),
            continuity_weight=_pick(args.lam, cfg, "lambda", 1.0),
            phi=_pick(args.phi, cfg, "phi", "hinge"),
            triplets_per_batch=_pick(
                args.triplets_per_batch, cfg, "triplets_per_batch", 4096
            ),
            drop_equal_labels=cfg.get("drop_equal_labels", True),
        )
    except ValueError as exc:
        raise BadConfig(str(exc)) from exc


def _load_records(path: str, role: str) -> list[datastore.ArchRecord]:
    try:
        return datastore.load_jsonl(path)
    except IoError as exc:
        raise MissingData(f"{role} file unreadable: {exc}") from exc


def _load_model(path: str) -> tensornet.PredictorModel:
    try:
        return tensornet.load(path)
    except IoError as exc:
        raise MissingModel(f"model file unreadable: {exc}") from exc


def _write_or_print(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def cmd_encode(args) -> int:
    cfg = load_config(args.config)
    sk = _skeleton(cfg["skeleton"])
    try:
        with open(args.cell, encoding="utf-8") as fh:
            cell = CellGraph.from_text(fh.read())
    except OSError as exc:
        raise MissingData(f"cell file unreadable: {exc}") from exc
    except (ValueError, RenasError) as exc:
        raise SchemaError(f"{args.cell}: {exc}") from exc
    tensor = pipeline.encode_cell(cell, sk)
    assert tensor.shape == (NUM_CHANNELS, GRID, GRID)
    _write_or_print(json.dumps(tensor.tolist()), args.out)
    return EXIT_OK


def cmd_gen_synthetic(args) -> int:
    if args.count is None:
        if args.max_nodes > 5:
            raise BadConfig("exhaustive generation needs --max-nodes <= 5; give --count")
        cells = evosearch.enumerate_space(args.max_nodes)
    else:
        if args.count < 1:
            raise BadConfig("--count must be positive")
        cells = datastore.sample_cells(args.count, seed=args.seed, max_nodes=args.max_nodes)
    records = datastore.synthetic_store(cells)
    datastore.save_jsonl(records, args.out)
    print(f"wrote {len(records)} records to {args.out}")
    return EXIT_OK


def _resolved_training(args, cfg_all) -> tuple[pipeline.TrainConfig, Skeleton]:
    t = cfg_all["training"]
    loss_cfg = _loss_config(args, cfg_all["loss"])
    try:
        train_cfg = pipeline.TrainConfig(
            epochs=_pick(args.epochs, t, "epochs", 200),
            batch=_pick(args.batch, t, "batch", 1024),
            lr=_pick(args.lr, t, "lr", 1e-3),
            weight_decay=_pick(args.weight_decay, t, "weight_decay", 5e-4),
            seed=_pick(args.seed, t, "seed", 0),
            loss=args.loss,
            loss_cfg=loss_cfg,
            augment=args.augment or t.get("augment", False),
            eval_every=_pick(args.eval_every, t, "eval_every", 10),
        )
    except (ValueError, RenasError) as exc:
        raise BadConfig(str(exc)) from exc
    return train_cfg, _skeleton(cfg_all["skeleton"])


def cmd_train(args) -> int:
    cfg_all = load_config(args.config)
    paths = cfg_all["paths"]
    data_path = _pick(args.data, paths, "data", None)
    model_path = _pick(args.model, paths, "model", None)
    if not data_path or not model_path:
        raise BadConfig("train needs --data and --model (or config [paths])")
    train_cfg, sk = _resolved_training(args, cfg_all)
    records = _load_records(data_path, "training data")
    eval_path = _pick(args.eval_data, paths, "eval_data", None)
    eval_records = _load_records(eval_path, "eval data") if eval_path else None

    log_path = _pick(args.log, paths, "log", None)
    log_lines = []
    resolved = {
        "command": "train",
        "data": data_path,
        "model": model_path,
        "eval_data": eval_path,
        "loss": train_cfg.loss,
        "epochs": train_cfg.epochs,
        "batch": train_cfg.batch,
        "lr": train_cfg.lr,
        "weight_decay": train_cfg.weight_decay,
        "seed": train_cfg.seed,
        "augment": train_cfg.augment,
        "eval_every": train_cfg.eval_every,
        "margin": train_cfg.loss_cfg.margin,
        "lambda": train_cfg.loss_cfg.continuity_weight,
        "phi": train_cfg.loss_cfg.phi,
        "triplets_per_batch": train_cfg.loss_cfg.triplets_per_batch,
        "skeleton": {
            "input_hw": sk.input_hw,
            "stem_channels": sk.stem_channels,
            "stacks": sk.stacks,
            "cells_per_stack": sk.cells_per_stack,
        },
    }
    log_lines.append(json.dumps(resolved, sort_keys=True))

    model, log = pipeline.train_predictor(
        records, train_cfg, sk=sk, eval_records=eval_records
    )
    for entry in log:
        log_lines.append(json.dumps(entry, sort_keys=True))
    tensornet.save(model, model_path)
    if log_path:
        with open(log_path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(log_lines) + "\n")
    final = log[-1] if log else {}
    summary = f"trained {train_cfg.loss} for {train_cfg.epochs} epochs on {len(records)} records"
    if "ktau" in final:
        summary += f"; holdout ktau {final['ktau']:.4f}"
    print(summary)
    print(f"model written to {model_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = _load_model(args.model)
    records = _load_records(args.data, "eval data")
    report = pipeline.evaluate(model, records)
    lines = [
        f"samples      {report.n}",
        f"concordant   {report.concordant}",
        f"discordant   {report.discordant}",
        f"tied         {report.tied}",
        f"ktau         {report.ktau:.6f}",
    ]
    print("\n".join(lines))
    if args.json:
        _write_or_print(json.dumps(report.as_dict(), sort_keys=True), args.json)
    return EXIT_OK


def _search_result_lines(result) -> str:
    lines = []
    for rank, (cell, score) in enumerate(result, start=1):
        lines.append(
            json.dumps(
                {
                    "rank": rank,
                    "id": cell_id(cell),
                    "n": cell.n,
                    "adj": ["".join(str(v) for v in row) for row in cell.adj],
                    "ops": [OP_TOKENS[op] for op in cell.ops],
                    "score": score,
                },
                sort_keys=True,
            )
        )
    return "\n".join(lines) + "\n"


def cmd_search(args) -> int:
    model = _load_model(args.model)
    if args.mode == "ea":
        try:
            cfg = evosearch.EaConfig(
                generations=args.generations,
                population=args.population,
                seed=args.seed,
                top_k=args.top_k,
                max_nodes=args.max_nodes,
            )
        except evosearch.InvalidConfig as exc:
            raise BadConfig(str(exc)) from exc
        result = evosearch.ea_search(model, cfg)
    else:
        if not args.data:
            raise BadConfig("exhaustive mode searches a store: give --data records.jsonl")
        records = _load_records(args.data, "search space")
        result = evosearch.exhaustive_search(
            model, [r.cell for r in records], top_k=args.top_k
        )
    _write_or_print(_search_result_lines(result), args.out)
    return EXIT_OK


def cmd_analyze(args) -> int:
    records = _load_records(args.data, "store")
    rows = datastore.analyze_subspaces(records)
    header = f"{'conv3':<6}{'dist':<6}{'count':<8}{'best':<8}{'mean':<8}"
    body = [header]
    for r in rows:
        best = "-" if r["best_acc"] is None else f"{r['best_acc']:.2f}"
        mean = "-" if r["mean_acc"] is None else f"{r['mean_acc']:.2f}"
        body.append(
            f"{'yes' if r['has_conv3'] else 'no':<6}{r['io_distance']:<6}"
            f"{r['count']:<8}{best:<8}{mean:<8}"
        )
    print("\n".join(body))
    if args.json:
        _write_or_print(json.dumps(rows), args.json)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="renas",
        description="Rank-based architecture performance prediction and search.",
    )
    sub = top.add_subparsers(dest="command", required=True)

    enc = sub.add_parser("encode", help="print a cell's feature tensor as JSON")
    enc.add_argument("--cell", required=True, help="cell text file")
    enc.add_argument("--config", help="INI config file")
    enc.add_argument("--out", help="output path (default: stdout)")
    enc.set_defaults(fn=cmd_encode)

    gen = sub.add_parser("gen-synthetic", help="write a synthetic labeled store")
    gen.add_argument("--out", required=True, help="output JSONL path")
    gen.add_argument("--count", type=int, help="records to sample; omit to enumerate")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--max-nodes", type=int, default=7, dest="max_nodes")
    gen.set_defaults(fn=cmd_gen_synthetic)

    tr = sub.add_parser("train", help="fit the predictor on a JSONL store")
    tr.add_argument("--data", help="training JSONL")
    tr.add_argument("--model", help="output model path")
    tr.add_argument("--eval-data", dest="eval_data", help="holdout JSONL for KTau logging")
    tr.add_argument("--log", help="training log JSONL path")
    tr.add_argument("--config", help="INI config file")
    tr.add_argument("--loss", choices=("combined", "l1", "mse"), default="combined")
    tr.add_argument("--epochs", type=int)
    tr.add_argument("--batch", type=int)
    tr.add_argument("--lr", type=float)
    tr.add_argument("--weight-decay", dest="weight_decay", type=float)
    tr.add_argument("--seed", type=int)
    tr.add_argument("--eval-every", dest="eval_every", type=int)
    tr.add_argument("--augment", action="store_true", help="train on same-depth permutations")
    tr.add_argument("--margin", type=float, help="ranking hinge margin")
    tr.add_argument("--lambda", dest="lam", type=float, help="continuity term weight")
    tr.add_argument("--phi", choices=("hinge", "logistic", "exponential"))
    tr.add_argument(
        "--triplets-per-batch", dest="triplets_per_batch", type=int,
        help="triplet sample budget per batch",
    )
    tr.set_defaults(fn=cmd_train)

    ev = sub.add_parser("eval", help="rank-correlation report of a model on a store")
    ev.add_argument("--model", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--json", help="also write the report as JSON here ('-' = stdout)")
    ev.set_defaults(fn=cmd_eval)

    se = sub.add_parser("search", help="search architectures with a trained model")
    se.add_argument("--model", required=True)
    se.add_argument("--mode", choices=("ea", "exhaustive"), default="ea")
    se.add_argument("--data", help="store to rank in exhaustive mode")
    se.add_argument("--generations", type=int, default=500)
    se.add_argument("--population", type=int, default=64)
    se.add_argument("--seed", type=int, default=0)
    se.add_argument("--top-k", dest="top_k", type=int, default=10)
    se.add_argument("--max-nodes", dest="max_nodes", type=int, default=7)
    se.add_argument("--out", help="result JSONL (default: stdout)")
    se.set_defaults(fn=cmd_search)

    an = sub.add_parser("analyze", help="sub-space statistics of a store")
    an.add_argument("--data", required=True)
    an.add_argument("--json", help="also write rows as JSON here ('-' = stdout)")
    an.set_defaults(fn=cmd_analyze)

    return top


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except BadConfig as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MissingData, MissingModel) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (SchemaError, TooFew) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (CorruptFile, VersionMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (RenasError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
