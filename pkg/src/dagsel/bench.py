"""Synthetic benchmark generation with planted structure, difficulty
bucketing, and a loader for the real released benchmark files.

Outcomes are planted so that success depends jointly on the sample's
latent cluster (carried by its features), its category, and the chosen
model per subtask type present in its graph. Tuning the competence
tensor controls how much headroom each selector family has.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    DagselError,
    FormatError,
    JoinError,
    NoObservationError,
    SpecError,
)
from .features import FeatureStore
from .graph import (
    CATEGORIES,
    Dataset,
    ModelZoo,
    Sample,
    TaskGraph,
    enumerate_choices,
    filter_degenerate,
)
from .programs import parse_program
from .zoos import standard_zoo


@dataclass
class SynthSpec:
    """Everything the generator needs; round-trips through JSON."""

    n_samples: int
    seed: int
    categories: dict[str, list[str]]  # category -> program templates
    competence: dict  # cluster -> category -> type name -> per-model logit offsets
    d1: int = 16
    n_clusters: int = 3
    separation: float = 4.0
    feature_noise: float = 1.0
    base_logit: float = 0.0
    outcome_noise: float = 0.0
    n_loc: int = 4
    n_vqa: int = 3
    loc_times: Optional[list] = None
    vqa_times: Optional[list] = None

    def to_obj(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "seed": self.seed,
            "categories": self.categories,
            "competence": self.competence,
            "d1": self.d1,
            "n_clusters": self.n_clusters,
            "separation": self.separation,
            "feature_noise": self.feature_noise,
            "base_logit": self.base_logit,
            "outcome_noise": self.outcome_noise,
            "n_loc": self.n_loc,
            "n_vqa": self.n_vqa,
            "loc_times": self.loc_times,
            "vqa_times": self.vqa_times,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "SynthSpec":
        try:
            return cls(**obj)
        except TypeError as err:
            raise SpecError(f"malformed generator spec: {err}") from None

    @classmethod
    def load(cls, path) -> "SynthSpec":
        try:
            with open(path, encoding="utf-8") as fh:
                obj = json.load(fh)
        except json.JSONDecodeError as err:
            raise SpecError(f"{path}: invalid JSON ({err.msg})") from None
        if not isinstance(obj, dict):
            raise SpecError(f"{path}: spec must be a JSON object")
        return cls.from_obj(obj)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_obj(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _validate_spec(spec: SynthSpec, zoo: ModelZoo) -> dict[str, list[TaskGraph]]:
    if spec.n_samples <= 0 or spec.d1 <= 0 or spec.n_clusters <= 0:
        raise SpecError("n_samples, d1, n_clusters must be positive")
    if not spec.categories:
        raise SpecError("at least one category with templates is required")
    graphs: dict[str, list[TaskGraph]] = {}
    for cat, templates in spec.categories.items():
        if cat not in CATEGORIES:
            raise SpecError(f"unknown category {cat!r}")
        if not templates:
            raise SpecError(f"category {cat!r} has no templates")
        parsed = []
        for text in templates:
            try:
                parsed.append(parse_program(text, zoo, sample_id="template"))
            except DagselError as err:
                raise SpecError(f"category {cat!r}: bad template ({err})") from None
        graphs[cat] = parsed
    for cluster_key, per_cat in spec.competence.items():
        try:
            cluster = int(cluster_key)
        except (TypeError, ValueError):
            raise SpecError(f"competence key {cluster_key!r} is not a cluster index") from None
        if not 0 <= cluster < spec.n_clusters:
            raise SpecError(f"competence cluster {cluster} out of range")
        for cat, per_type in per_cat.items():
            if cat not in spec.categories:
                raise SpecError(f"competence references unknown category {cat!r}")
            for type_name, offsets in per_type.items():
                if not zoo.has_type(type_name):
                    raise SpecError(f"competence references unknown type {type_name!r}")
                n = zoo.n_models(zoo.type_by_name(type_name).id)
                if len(offsets) != n:
                    raise SpecError(
                        f"competence[{cluster}][{cat}][{type_name}] has {len(offsets)} entries, type has {n} models"
                    )
    return graphs


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    nn = x >= 0
    out[nn] = 1.0 / (1.0 + np.exp(-x[nn]))
    e = np.exp(x[~nn])
    out[~nn] = e / (1.0 + e)
    return out


def generate_with_info(spec: SynthSpec) -> tuple[Dataset, FeatureStore, ModelZoo, dict]:
    """Draw a dataset; byte-deterministic for a fixed spec.

    Per sample the generator draws, in order: cluster, category, template,
    feature noise, one shared outcome-noise value, then one uniform per
    choice. Success probability is sigmoid(base + sum of the competence
    offsets of the chosen models over the types present in the graph +
    noise). The info dict exposes the planted clusters and centroids so
    probe tests can certify the features carry the cluster signal.
    """
    zoo = standard_zoo(spec.n_loc, spec.n_vqa, spec.loc_times, spec.vqa_times)
    template_graphs = _validate_spec(spec, zoo)
    space = enumerate_choices(zoo)
    C = space.size
    js = space.decode_matrix(np.arange(C))
    pos_of_type = {tid: p for p, tid in enumerate(space.type_ids)}
    time_of = {
        t.id: np.array([m.avg_exec_time for m in zoo.models[t.id]]) for t in zoo.types
    }

    def comp_vector(cluster: int, cat: str, tid: int) -> np.ndarray:
        entry = spec.competence.get(str(cluster), spec.competence.get(cluster, {}))
        offsets = entry.get(cat, {}).get(zoo.type_by_id(tid).name)
        if offsets is None:
            return np.zeros(zoo.n_models(tid))
        return np.asarray(offsets, dtype=np.float64)

    rng = np.random.default_rng(spec.seed)
    centroids = rng.standard_normal((spec.n_clusters, spec.d1))
    centroids /= np.linalg.norm(centroids, axis=1, keepdims=True)
    centroids *= spec.separation
    cat_names = sorted(spec.categories)

    samples = []
    vectors = {}
    clusters = {}
    outcome_rows = []
    time_rows = []
    for i in range(spec.n_samples):
        sid = f"s{i:05d}"
        cluster = int(rng.integers(spec.n_clusters))
        cat = cat_names[int(rng.integers(len(cat_names)))]
        graph = template_graphs[cat][int(rng.integers(len(template_graphs[cat])))]
        graph = replace(graph, sample_id=sid)
        x = centroids[cluster] + spec.feature_noise * rng.standard_normal(spec.d1)
        eps = spec.outcome_noise * float(rng.standard_normal())
        logits = np.full(C, spec.base_logit + eps)
        types_present = sorted(set(graph.node_types))
        for tid in types_present:
            logits += comp_vector(cluster, cat, tid)[js[:, pos_of_type[tid]]]
        outcomes = (rng.random(C) < _sigmoid(logits)).astype(np.int8)
        counts = {tid: graph.node_types.count(tid) for tid in types_present}
        times = np.zeros(C)
        for tid, cnt in counts.items():
            times += cnt * time_of[tid][js[:, pos_of_type[tid]]]
        samples.append(Sample(sample_id=sid, category=cat, graph=graph, feature_ref=sid))
        vectors[sid] = x
        clusters[sid] = cluster
        outcome_rows.append(outcomes)
        time_rows.append(times)

    dataset = Dataset(
        samples=tuple(samples),
        outcomes=np.stack(outcome_rows),
        observed=np.ones((spec.n_samples, C), dtype=bool),
        times=np.stack(time_rows),
    )
    dataset = filter_degenerate(dataset)
    store = FeatureStore({s.sample_id: vectors[s.sample_id] for s in dataset.samples})
    info = {
        "clusters": {s.sample_id: clusters[s.sample_id] for s in dataset.samples},
        "centroids": centroids,
    }
    return dataset, store, zoo, info


def generate(spec: SynthSpec) -> tuple[Dataset, FeatureStore, ModelZoo]:
    dataset, store, zoo, _ = generate_with_info(spec)
    return dataset, store, zoo


def bucket_difficulty(dataset: Dataset) -> dict[int, list[str]]:
    """Partition samples into difficulty levels 1..5 by executable ratio.

    Level l covers ratios in [1 - 0.2 l, 1 - 0.2 (l - 1)), except level 1
    also includes 1.0. Computed in integers so boundary ratios like 0.2
    land exactly.
    """
    levels: dict[int, list[str]] = {level: [] for level in range(1, 6)}
    for i, sample in enumerate(dataset.samples):
        mask = dataset.observed[i]
        obs = int(mask.sum())
        if obs == 0:
            raise NoObservationError(f"sample {sample.sample_id} has no observed outcomes")
        succ = int(dataset.outcomes[i][mask].sum())
        for level in range(1, 6):
            if 5 * succ >= (5 - level) * obs:
                levels[level].append(sample.sample_id)
                break
    return levels


@dataclass(frozen=True)
class MsGqaFiles:
    instance_results: Path
    graph_description: Path
    question_metadata: Path

    def __post_init__(self):
        for p in (self.instance_results, self.graph_description, self.question_metadata):
            if not Path(p).exists():
                raise JoinError(f"required file missing: {p}")


_STATUS_KEYS = ("status", "state", "success", "result")
_TIME_KEYS = ("time", "cost_time", "exec_time", "duration")
_PROGRAM_KEYS = ("program", "programing_text", "programming_text", "text")
_TRUTHY = {1, True, "1", "success", "succeed", "succeeded", "true", "ok"}
_FALSY = {0, False, "0", "fail", "failed", "failure", "error", "false"}
_STRUCTURAL = {c.lower(): c for c in CATEGORIES}


def _parse_status(record: dict, where: str) -> int:
    for key in _STATUS_KEYS:
        if key in record:
            val = record[key]
            if isinstance(val, str):
                val = val.lower()
            if val in _TRUTHY:
                return 1
            if val in _FALSY:
                return 0
            raise FormatError(f"{where}: unrecognized status value {record[key]!r}")
    raise FormatError(f"{where}: no status field among {_STATUS_KEYS}")


def _parse_time(record: dict) -> Optional[float]:
    for key in _TIME_KEYS:
        if key in record and record[key] is not None:
            return float(record[key])
    return None


def _iter_choice_records(entry, where: str):
    if isinstance(entry, list):
        for idx, rec in enumerate(entry):
            yield int(rec.get("choice_index", rec.get("choice", rec.get("index", idx)))), rec
    elif isinstance(entry, dict):
        for key, rec in entry.items():
            try:
                yield int(key), rec
            except ValueError:
                raise FormatError(f"{where}: choice key {key!r} is not an index") from None
    else:
        raise FormatError(f"{where}: expected a list or object of per-choice records")


def _load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as err:
        raise FormatError(f"{path}: invalid JSON ({err.msg})") from None
    if not isinstance(obj, dict):
        raise FormatError(f"{path}: expected a top-level JSON object")
    return obj


def load_msgqa(files: MsGqaFiles) -> tuple[Dataset, ModelZoo, dict[str, str]]:
    """Join the three released files into a Dataset.

    The release records 70 joint choices per sample (10 grounding models
    x 7 answering models); the loader tolerates small key-name variations
    in the per-choice records.
    """
    results = _load_json(files.instance_results)
    programs = _load_json(files.graph_description)
    questions = _load_json(files.question_metadata)

    zoo = standard_zoo(10, 7)
    C = enumerate_choices(zoo).size

    samples = []
    texts = {}
    outcome_rows = []
    observed_rows = []
    time_rows = []
    for sid in results:
        if sid not in programs:
            raise JoinError(f"sample {sid!r} has results but no graph description")
        if sid not in questions:
            raise JoinError(f"sample {sid!r} has results but no question metadata")
        entry = programs[sid]
        if isinstance(entry, dict):
            for key in _PROGRAM_KEYS:
                if key in entry:
                    entry = entry[key]
                    break
        if not isinstance(entry, str):
            raise FormatError(f"graph description for {sid!r} has no program text")
        meta = questions[sid]
        structural = None
        if isinstance(meta, dict):
            structural = meta.get("types", {}).get("structural")
        if not isinstance(structural, str) or structural.lower() not in _STRUCTURAL:
            raise FormatError(f"question {sid!r} has no usable structural type")
        category = _STRUCTURAL[structural.lower()]

        outcomes = np.zeros(C, dtype=np.int8)
        observed = np.zeros(C, dtype=bool)
        times = np.full(C, np.nan)
        for idx, rec in _iter_choice_records(results[sid], f"results[{sid}]"):
            if not 0 <= idx < C:
                raise FormatError(f"results[{sid}]: choice index {idx} outside 0..{C - 1}")
            outcomes[idx] = _parse_status(rec, f"results[{sid}][{idx}]")
            observed[idx] = True
            t = _parse_time(rec)
            if t is not None:
                times[idx] = t

        graph = parse_program(entry, zoo, sample_id=sid)
        samples.append(Sample(sample_id=sid, category=category, graph=graph, feature_ref=sid))
        texts[sid] = entry
        outcome_rows.append(outcomes)
        observed_rows.append(observed)
        time_rows.append(times)

    if not samples:
        raise FormatError(f"{files.instance_results}: no samples")
    dataset = Dataset(
        samples=tuple(samples),
        outcomes=np.stack(outcome_rows),
        observed=np.stack(observed_rows),
        times=np.stack(time_rows),
    )
    dataset = filter_degenerate(dataset)
    texts = {s.sample_id: texts[s.sample_id] for s in dataset.samples}
    return dataset, zoo, texts
