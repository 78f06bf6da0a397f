"""Directory layout for datasets: zoo.json, graphs.jsonl, outcomes.jsonl,
features.jsonl. Saves are byte-deterministic; loads are strict and fail
loudly on any cross-file inconsistency.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DuplicateIdError, FormatError, JoinError
from .features import FeatureStore, load_features, save_features
from .graph import Dataset, ModelZoo, Sample, enumerate_choices
from .programs import graph_to_program, parse_program
from .zoos import zoo_from_obj, zoo_to_obj

ZOO_FILE = "zoo.json"
GRAPHS_FILE = "graphs.jsonl"
OUTCOMES_FILE = "outcomes.jsonl"
FEATURES_FILE = "features.jsonl"


def save_dataset(directory, dataset: Dataset, store: FeatureStore, zoo: ModelZoo) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / ZOO_FILE, "w", encoding="utf-8") as fh:
        json.dump(zoo_to_obj(zoo), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(directory / GRAPHS_FILE, "w", encoding="utf-8") as fh:
        for sample in dataset.samples:
            row = {
                "sample_id": sample.sample_id,
                "category": sample.category,
                "program": graph_to_program(sample.graph, zoo),
            }
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    with open(directory / OUTCOMES_FILE, "w", encoding="utf-8") as fh:
        for i, sample in enumerate(dataset.samples):
            results = []
            for c in np.flatnonzero(dataset.observed[i]):
                rec = {"choice_index": int(c), "status": int(dataset.outcomes[i, c])}
                if not np.isnan(dataset.times[i, c]):
                    rec["time"] = float(dataset.times[i, c])
                results.append(rec)
            fh.write(json.dumps({"sample_id": sample.sample_id, "results": results}, sort_keys=True) + "\n")
    save_features(store, directory / FEATURES_FILE)


def _read_jsonl(path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as err:
                raise FormatError(f"{path}:{lineno}: invalid JSON ({err.msg})") from None
            if not isinstance(obj, dict):
                raise FormatError(f"{path}:{lineno}: expected a JSON object per line")
            rows.append(obj)
    return rows


def load_dataset(directory) -> tuple[Dataset, FeatureStore, ModelZoo]:
    directory = Path(directory)
    for name in (ZOO_FILE, GRAPHS_FILE, OUTCOMES_FILE, FEATURES_FILE):
        if not (directory / name).exists():
            raise JoinError(f"dataset directory {directory} is missing {name}")

    with open(directory / ZOO_FILE, encoding="utf-8") as fh:
        try:
            zoo_obj = json.load(fh)
        except json.JSONDecodeError as err:
            raise FormatError(f"{directory / ZOO_FILE}: invalid JSON ({err.msg})") from None
    zoo = zoo_from_obj(zoo_obj)
    C = enumerate_choices(zoo).size

    samples = []
    seen = set()
    for row in _read_jsonl(directory / GRAPHS_FILE):
        for key in ("sample_id", "category", "program"):
            if key not in row:
                raise FormatError(f"{GRAPHS_FILE}: row missing {key!r}")
        sid = row["sample_id"]
        if sid in seen:
            raise DuplicateIdError(f"{GRAPHS_FILE}: duplicate sample id {sid!r}")
        seen.add(sid)
        graph = parse_program(row["program"], zoo, sample_id=sid)
        samples.append(Sample(sample_id=sid, category=row["category"], graph=graph, feature_ref=sid))

    by_id = {s.sample_id: i for i, s in enumerate(samples)}
    n = len(samples)
    outcomes = np.zeros((n, C), dtype=np.int8)
    observed = np.zeros((n, C), dtype=bool)
    times = np.full((n, C), np.nan)
    matched = set()
    for row in _read_jsonl(directory / OUTCOMES_FILE):
        sid = row.get("sample_id")
        if sid not in by_id:
            raise JoinError(f"{OUTCOMES_FILE}: outcomes for unknown sample {sid!r}")
        if sid in matched:
            raise DuplicateIdError(f"{OUTCOMES_FILE}: duplicate sample id {sid!r}")
        matched.add(sid)
        i = by_id[sid]
        for rec in row.get("results", []):
            if "choice_index" not in rec or "status" not in rec:
                raise FormatError(f"{OUTCOMES_FILE}: result for {sid!r} missing choice_index/status")
            c = int(rec["choice_index"])
            if not 0 <= c < C:
                raise FormatError(f"{OUTCOMES_FILE}: choice index {c} outside 0..{C - 1} for {sid!r}")
            if rec["status"] not in (0, 1):
                raise FormatError(f"{OUTCOMES_FILE}: status for {sid!r} must be 0 or 1")
            outcomes[i, c] = int(rec["status"])
            observed[i, c] = True
            if "time" in rec and rec["time"] is not None:
                times[i, c] = float(rec["time"])
    unmatched = seen - matched
    if unmatched:
        raise JoinError(f"{GRAPHS_FILE}: samples with no outcomes row: {sorted(unmatched)[:5]}")

    store = load_features(directory / FEATURES_FILE)
    for s in samples:
        if s.feature_ref not in store:
            raise JoinError(f"{FEATURES_FILE}: no feature vector for sample {s.sample_id!r}")

    dataset = Dataset(samples=tuple(samples), outcomes=outcomes, observed=observed, times=times)
    return dataset, store, zoo
