"""Evaluation protocols: successful-execution rate, bucketed breakdowns,
missing-data and time-budget sweeps, latency measurement, and report IO.

Every protocol consults the recorded outcome matrix instead of executing
models, so evaluation is cheap and deterministic. Latency measurement is
the one wall-clock exception and is kept out of deterministic reports.
"""
from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .bench import bucket_difficulty
from .errors import FormatError, InfeasibleBudgetError, UnobservedOutcomeError
from .graph import CATEGORIES, Dataset, Sample
from .training import apply_missing

REPORT_HEADER = ("method", "bucket", "ser", "std", "count")

# Builder protocol for retraining sweeps: (reduced train set, seed) -> selector.
SelectorBuilder = Callable[[Dataset, int], object]


def _selection_outcome(selector, test_set: Dataset, row: int, budget: Optional[float]) -> int:
    """1 if the selected choice executes successfully, else 0."""
    sample = test_set.samples[row]
    try:
        choice = selector.select_choice(sample, budget=budget)
    except InfeasibleBudgetError:
        if budget is None:
            raise
        return 0
    idx = selector.space.index_of(choice)
    if not test_set.observed[row, idx]:
        raise UnobservedOutcomeError(
            f"selected choice {idx} for sample {sample.sample_id!r} has no recorded outcome"
        )
    return int(test_set.outcomes[row, idx])


def ser(selector, test_set: Dataset, budget: Optional[float] = None) -> float:
    """Fraction of test samples whose selected choice has status 1.

    With a budget, samples where no choice fits are counted as failures.
    """
    if not test_set.samples:
        raise ValueError("cannot evaluate on an empty test set")
    hits = sum(
        _selection_outcome(selector, test_set, i, budget) for i in range(len(test_set.samples))
    )
    return hits / len(test_set.samples)


def breakdown(selector, test_set: Dataset, by: str = "category") -> list[dict]:
    """Per-bucket SER rows plus a Full row last.

    Category rows cover the categories present; difficulty rows always
    cover levels 1..5, empty levels reported with count 0 and no SER.
    """
    if by == "category":
        buckets = [
            (cat, [i for i, s in enumerate(test_set.samples) if s.category == cat])
            for cat in CATEGORIES
            if any(s.category == cat for s in test_set.samples)
        ]
    elif by == "difficulty":
        by_level = bucket_difficulty(test_set)
        row_of = {s.sample_id: i for i, s in enumerate(test_set.samples)}
        buckets = [
            (f"level={level}", [row_of[sid] for sid in by_level[level]]) for level in range(1, 6)
        ]
    else:
        raise ValueError(f"unknown breakdown key {by!r} (use 'category' or 'difficulty')")

    outcomes = [
        _selection_outcome(selector, test_set, i, None) for i in range(len(test_set.samples))
    ]
    name = getattr(selector, "name", "")
    rows = []
    for bucket, members in buckets:
        if members:
            value = sum(outcomes[i] for i in members) / len(members)
        else:
            value = None
        rows.append({"method": name, "bucket": bucket, "ser": value, "std": None, "count": len(members)})
    rows.append(
        {
            "method": name,
            "bucket": "Full",
            "ser": sum(outcomes) / len(outcomes),
            "std": None,
            "count": len(outcomes),
        }
    )
    return rows


def sweep_missing(
    builders: Mapping[str, SelectorBuilder],
    train_set: Dataset,
    test_set: Dataset,
    mode: str,
    ratios: Sequence[float],
    seeds: Sequence[int],
    jobs: int = 1,
) -> list[dict]:
    """Degrade the training data, rebuild each method, score the fixed test set.

    One rebuild per (method, ratio, seed); rows report mean and std of SER
    over seeds. Training-free methods simply ignore the training set.
    """
    if not seeds:
        raise ValueError("at least one seed is required")

    def cell(name: str, ratio: float, seed: int) -> float:
        reduced = apply_missing(train_set, mode, ratio, seed=seed)
        selector = builders[name](reduced, seed)
        return ser(selector, test_set)

    keys = [(name, ratio, seed) for name in builders for ratio in ratios for seed in seeds]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {key: pool.submit(cell, *key) for key in keys}
        values = {key: fut.result() for key, fut in futures.items()}
    else:
        values = {key: cell(*key) for key in keys}

    rows = []
    for name in builders:
        for ratio in ratios:
            per_seed = np.array([values[(name, ratio, seed)] for seed in seeds])
            rows.append(
                {
                    "method": name,
                    "bucket": f"ratio={ratio:g}",
                    "ser": float(per_seed.mean()),
                    "std": float(per_seed.std()),
                    "count": len(seeds),
                }
            )
    return rows


def sweep_time_limit(selectors: Sequence, test_set: Dataset, budgets: Sequence[float]) -> list[dict]:
    """SER per (method, budget); infeasible samples count as failures."""
    rows = []
    for selector in selectors:
        for budget in budgets:
            label = "inf" if budget is None or np.isinf(budget) else f"{budget:g}"
            effective = None if (budget is None or np.isinf(budget)) else budget
            rows.append(
                {
                    "method": selector.name,
                    "bucket": f"budget={label}",
                    "ser": ser(selector, test_set, budget=effective),
                    "std": None,
                    "count": len(test_set.samples),
                }
            )
    return rows


def measure_latency(selector, samples: Sequence[Sample], repetitions: int = 3) -> float:
    """Mean wall-clock seconds per selection, after one warmup pass."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if not samples:
        raise ValueError("at least one sample is required")
    for sample in samples:
        selector.select_choice(sample)
    start = time.perf_counter()
    for _ in range(repetitions):
        for sample in samples:
            selector.select_choice(sample)
    elapsed = time.perf_counter() - start
    return elapsed / (repetitions * len(samples))


def _normalize_row(row: dict) -> dict:
    out = {key: row.get(key) for key in REPORT_HEADER}
    if out["method"] is None:
        out["method"] = ""
    return out


def emit_report(rows: Sequence[dict], path, format: str = "csv") -> None:
    """Write rows with the fixed column order method,bucket,ser,std,count."""
    if format == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(REPORT_HEADER)
            for row in rows:
                norm = _normalize_row(row)
                writer.writerow(
                    ["" if norm[key] is None else str(norm[key]) for key in REPORT_HEADER]
                )
    elif format == "jsonl":
        with open(path, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(_normalize_row(row), sort_keys=True) + "\n")
    else:
        raise FormatError(f"unknown report format {format!r} (use 'csv' or 'jsonl')")


def load_report(path, format: str = "csv") -> list[dict]:
    """Parse a report back to rows equal to what emit_report was given."""
    rows = []
    if format == "csv":
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if tuple(header or ()) != REPORT_HEADER:
                raise FormatError(f"{path}: bad report header {header!r}")
            for rec in reader:
                if len(rec) != len(REPORT_HEADER):
                    raise FormatError(f"{path}: row has {len(rec)} fields")
                row = dict(zip(REPORT_HEADER, rec))
                rows.append(
                    {
                        "method": row["method"],
                        "bucket": row["bucket"],
                        "ser": None if row["ser"] == "" else float(row["ser"]),
                        "std": None if row["std"] == "" else float(row["std"]),
                        "count": None if row["count"] == "" else int(row["count"]),
                    }
                )
    elif format == "jsonl":
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rows.append(json.loads(line))
    else:
        raise FormatError(f"unknown report format {format!r} (use 'csv' or 'jsonl')")
    return rows
