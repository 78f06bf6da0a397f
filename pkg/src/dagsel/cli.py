"""Command-line entry point: gen / train / eval / select.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure
(non-finite loss, or a budget no assignment can satisfy).

Every command is deterministic given its seeds. `M3_DATA_DIR` supplies the
default dataset directory so pipelines can omit --data.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .baselines import (
    ExMetricSelector,
    FixedSelector,
    GlobalBestSelector,
    OracleSelector,
    RandomSelector,
    ScorerSelector,
)
from .bench import SynthSpec, generate
from .dataio import load_dataset, save_dataset
from .errors import (
    DagselError,
    FormatError,
    InfeasibleBudgetError,
    NonFiniteLossError,
)
from .metrics import REPORT_HEADER, breakdown, emit_report, sweep_missing, sweep_time_limit
from .selection import feasible_indices
from .training import (
    SplitSpec,
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    split,
    train,
)

METHODS = ("random", "visprog", "exmetric", "global_best", "ncf", "m3", "oracle")
TRAINED_METHODS = ("m3", "ncf")

USAGE_EXIT = 2
DATA_EXIT = 3
NUMERIC_EXIT = 4


class UsageError(Exception):
    pass


def _data_dir(args) -> Path:
    if args.data:
        return Path(args.data)
    env = os.environ.get("M3_DATA_DIR")
    if env:
        return Path(env)
    raise UsageError("no dataset directory: pass --data or set M3_DATA_DIR")


def _float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad float list {text!r}") from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad int list {text!r}") from exc


def _method_list(text: str) -> list[str]:
    names = [tok.strip() for tok in text.split(",") if tok.strip()]
    for name in names:
        if name not in METHODS:
            raise argparse.ArgumentTypeError(
                f"unknown method {name!r} (choose from {', '.join(METHODS)})"
            )
    return names


def _checkpoint_map(entries) -> dict[str, str]:
    out: dict[str, str] = {}
    for entry in entries or ():
        name, sep, path = entry.partition("=")
        if not sep:
            name, path = "m3", entry
        if name not in TRAINED_METHODS:
            raise UsageError(f"--checkpoint name must be one of {TRAINED_METHODS}, got {name!r}")
        out[name] = path
    return out


_CONFIG_FIELDS = {f.name for f in fields(TrainConfig)}
_EXTRA_CONFIG_KEYS = {"kind", "d2"}


def _load_train_config(args) -> tuple[TrainConfig, str, int]:
    """Defaults < JSON config file < command-line flags."""
    obj: dict = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{args.config}: invalid JSON ({exc.msg})") from exc
        if not isinstance(obj, dict):
            raise FormatError(f"{args.config}: config must be a JSON object")
        unknown = set(obj) - _CONFIG_FIELDS - _EXTRA_CONFIG_KEYS
        if unknown:
            raise FormatError(f"{args.config}: unknown config keys {sorted(unknown)}")

    kind = obj.get("kind", "graph")
    d2 = obj.get("d2", 32)
    cfg_obj = {k: v for k, v in obj.items() if k in _CONFIG_FIELDS}
    cfg = replace(TrainConfig(), **cfg_obj)

    overrides = {
        "hidden_d": args.hidden_d,
        "lr": args.lr,
        "weight_decay": args.weight_decay,
        "optimizer": args.optimizer,
        "batch_size": args.batch_size,
        "scheduler_step": args.scheduler_step,
        "scheduler_gamma": args.scheduler_gamma,
        "max_epochs": args.epochs,
        "patience": args.patience,
        "seed": args.seed,
        "loss": args.loss,
    }
    cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    if args.kind is not None:
        kind = args.kind
    if args.d2 is not None:
        d2 = args.d2
    return cfg, kind, d2


def _write_rows(rows, out: Optional[str], format: str) -> None:
    if out and out != "-":
        emit_report(rows, out, format=format)
        return
    if format == "csv":
        writer = csv.writer(sys.stdout)
        writer.writerow(REPORT_HEADER)
        for row in rows:
            writer.writerow(["" if row.get(k) is None else str(row.get(k)) for k in REPORT_HEADER])
    elif format == "jsonl":
        for row in rows:
            print(json.dumps({k: row.get(k) for k in REPORT_HEADER}, sort_keys=True))
    else:
        raise FormatError(f"unknown report format {format!r}")


def cmd_gen(args) -> int:
    spec = SynthSpec.load(args.spec)
    dataset, store, zoo = generate(spec)
    out_dir = Path(args.out) if args.out else _data_dir(args)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_dataset(out_dir, dataset, store, zoo)
    print(f"wrote {dataset.n_samples} samples x {dataset.n_choices} choices to {out_dir}")
    return 0


def cmd_train(args) -> int:
    data_dir = _data_dir(args)
    dataset, store, zoo = load_dataset(data_dir)
    cfg, kind, d2 = _load_train_config(args)
    train_set, val_set, _ = split(dataset, SplitSpec(seed=args.split_seed))
    ckpt, history = train(train_set, val_set, cfg, store, zoo, kind=kind, d2=d2)
    save_checkpoint(ckpt, args.out)
    history_path = args.history or str(Path(args.out).with_suffix(".history.csv"))
    with open(history_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "lr", "train_loss", "val_ser"])
        for rec in history:
            writer.writerow([rec["epoch"], rec["lr"], rec["train_loss"], rec["val_ser"]])
    print(f"trained {kind} scorer: best epoch {ckpt.epoch}, val_ser={ckpt.val_ser:.4f}")
    return 0


def _build_selector(name, *, dataset, train_split, zoo, store, ckpts, seed):
    if name == "random":
        return RandomSelector(zoo, seed=seed)
    if name == "visprog":
        return FixedSelector(zoo)
    if name == "exmetric":
        return ExMetricSelector(zoo)
    if name == "global_best":
        return GlobalBestSelector(train_split, zoo)
    if name == "oracle":
        return OracleSelector(dataset, zoo)
    ckpt = load_checkpoint(ckpts[name])
    if ckpt.zoo != zoo:
        raise FormatError(f"checkpoint {ckpts[name]!r} was trained against a different model zoo")
    return ScorerSelector(ckpt.build_scorer(), store, name=name)


def _make_builder(name, *, dataset, zoo, store, ckpts, cfg, d2, val_split):
    """Sweep builders retrain trained methods per (ratio, seed) cell."""
    if name in TRAINED_METHODS:
        scorer_kind = "graph" if name == "m3" else "ncf"

        def builder(reduced, seed, _kind=scorer_kind, _name=name):
            ckpt, _ = train(
                reduced, val_split, replace(cfg, seed=seed), store, zoo, kind=_kind, d2=d2
            )
            return ScorerSelector(ckpt.build_scorer(), store, name=_name)

        return builder
    return lambda reduced, seed, _name=name: _build_selector(
        _name, dataset=dataset, train_split=reduced, zoo=zoo, store=store, ckpts=ckpts, seed=seed
    )


def cmd_eval(args) -> int:
    data_dir = _data_dir(args)
    dataset, store, zoo = load_dataset(data_dir)
    train_split, val_split, test_split = split(dataset, SplitSpec(seed=args.split_seed))
    ckpts = _checkpoint_map(args.checkpoint)
    cfg, _, d2 = _load_train_config(args)

    needs_checkpoint = not args.missing_mode
    if needs_checkpoint:
        for name in args.methods:
            if name in TRAINED_METHODS and name not in ckpts:
                raise UsageError(f"method {name!r} needs --checkpoint {name}=PATH")

    if args.missing_mode:
        if not args.ratios:
            raise UsageError("--missing-mode requires --ratios")
        builders = {
            name: _make_builder(
                name,
                dataset=dataset,
                zoo=zoo,
                store=store,
                ckpts=ckpts,
                cfg=cfg,
                d2=d2,
                val_split=val_split,
            )
            for name in args.methods
        }
        rows = sweep_missing(
            builders,
            train_split,
            test_split,
            args.missing_mode,
            args.ratios,
            args.seeds,
            jobs=args.jobs,
        )
    else:
        selectors = [
            _build_selector(
                name,
                dataset=dataset,
                train_split=train_split,
                zoo=zoo,
                store=store,
                ckpts=ckpts,
                seed=args.seed,
            )
            for name in args.methods
        ]
        if args.budgets:
            rows = sweep_time_limit(selectors, test_split, args.budgets)
        else:
            rows = []
            for selector in selectors:
                rows.extend(breakdown(selector, test_split, by=args.by))

    _write_rows(rows, args.out, args.format)
    return 0


def cmd_select(args) -> int:
    if args.topk < 1:
        raise UsageError(f"--topk must be >= 1, got {args.topk}")
    data_dir = _data_dir(args)
    dataset, store, zoo = load_dataset(data_dir)
    try:
        row = dataset.row_of(args.sample_id)
    except KeyError:
        raise FormatError(f"unknown sample {args.sample_id!r}") from None
    sample = dataset.samples[row]

    ckpt = load_checkpoint(args.checkpoint)
    if ckpt.zoo != zoo:
        raise FormatError(f"checkpoint {args.checkpoint!r} was trained against a different model zoo")
    scorer = ckpt.build_scorer()

    idx = feasible_indices(scorer.space, args.budget)
    logits, _ = scorer.logits(sample, store, idx)
    order = np.argsort(-logits, kind="stable")[: min(args.topk, logits.size)]

    present = sorted({tid for tid in sample.graph.node_types})
    for rank, j in enumerate(order, start=1):
        choice = scorer.space[int(idx[int(j)])]
        parts = [
            f"{zoo.type_by_id(tid).name}={zoo.model(tid, choice.model_index(tid)).name}"
            for tid in present
        ]
        print(f"rank={rank} score={float(logits[j]):+.6f} " + " ".join(parts))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dagsel",
        description="Model selection over task graphs: generate data, train a scorer, evaluate, select.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a synthetic dataset directory from a spec")
    p_gen.add_argument("spec", help="JSON benchmark spec")
    p_gen.add_argument("--out", help="output directory (default $M3_DATA_DIR)")
    p_gen.add_argument("--data", help=argparse.SUPPRESS)
    p_gen.set_defaults(func=cmd_gen)

    p_train = sub.add_parser("train", help="train a scorer on a dataset directory")
    p_train.add_argument("--data", help="dataset directory (default $M3_DATA_DIR)")
    p_train.add_argument("--config", help="JSON training config; flags override it")
    p_train.add_argument("--out", required=True, help="checkpoint output path")
    p_train.add_argument("--history", help="history CSV path (default OUT.history.csv)")
    p_train.add_argument("--split-seed", type=int, default=0)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate selection methods on the test split")
    p_eval.add_argument("--data", help="dataset directory (default $M3_DATA_DIR)")
    p_eval.add_argument(
        "--methods", type=_method_list, default=["m3"], help="comma list: " + ",".join(METHODS)
    )
    p_eval.add_argument(
        "--checkpoint",
        action="append",
        metavar="NAME=PATH",
        help="trained-scorer checkpoint (bare PATH means m3=PATH); repeatable",
    )
    p_eval.add_argument("--by", choices=("category", "difficulty"), default="category")
    p_eval.add_argument("--missing-mode", choices=("choices", "samples"))
    p_eval.add_argument("--ratios", type=_float_list, help="comma list, e.g. 0,0.4,0.8")
    p_eval.add_argument("--seeds", type=_int_list, default=[0], help="comma list, e.g. 0,1,2")
    p_eval.add_argument("--budgets", type=_float_list, help="comma list, inf allowed, e.g. 0.3,inf")
    p_eval.add_argument("--jobs", type=int, default=1)
    p_eval.add_argument("--seed", type=int, default=0, help="seed for stochastic selectors")
    p_eval.add_argument("--split-seed", type=int, default=0)
    p_eval.add_argument("--config", help="JSON training config for sweep retraining")
    p_eval.add_argument("--out", help="report path (default stdout)")
    p_eval.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p_eval.set_defaults(func=cmd_eval)

    p_select = sub.add_parser("select", help="pick models for one sample")
    p_select.add_argument("sample_id")
    p_select.add_argument("--data", help="dataset directory (default $M3_DATA_DIR)")
    p_select.add_argument("--checkpoint", required=True)
    p_select.add_argument("--budget", type=float)
    p_select.add_argument("--topk", type=int, default=1)
    p_select.set_defaults(func=cmd_select)

    for p in (p_train, p_eval):
        p.add_argument("--hidden-d", type=int, dest="hidden_d")
        p.add_argument("--lr", type=float)
        p.add_argument("--weight-decay", type=float, dest="weight_decay")
        p.add_argument("--optimizer", choices=("sgd", "adamw", "adam"))
        p.add_argument("--batch-size", type=int, dest="batch_size")
        p.add_argument("--scheduler-step", type=int, dest="scheduler_step")
        p.add_argument("--scheduler-gamma", type=float, dest="scheduler_gamma")
        p.add_argument("--epochs", type=int)
        p.add_argument("--patience", type=int)
        p.add_argument("--loss", choices=("cce", "bce"))
        p.add_argument("--kind", choices=("graph", "ncf"))
        p.add_argument("--d2", type=int)
    p_train.add_argument("--seed", type=int, help="training seed (default 0)")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (InfeasibleBudgetError, NonFiniteLossError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return NUMERIC_EXIT
    except (DagselError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT


if __name__ == "__main__":
    sys.exit(main())
