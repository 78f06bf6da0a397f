"""Reference selectors the learned method is compared against.

Every selector exposes select_choice(sample, budget=None) -> Choice, so
the evaluation harness can swap methods freely. Training-free selectors
respect the same budget filter as the learned one.
"""
from __future__ import annotations

import hashlib
from typing import Mapping, Optional

import numpy as np

from .errors import InfeasibleBudgetError, InvalidChoiceError, NoDataError
from .features import FeatureStore
from .graph import Choice, Dataset, ModelZoo, Sample, enumerate_choices
from .selection import feasible_indices, feasible_positions, select


def _stable_hash(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little")


def random_select(zoo: ModelZoo, seed: int, sample_id: str, budget: Optional[float] = None) -> Choice:
    """Uniform independent pick per type; deterministic per (seed, id)."""
    rng = np.random.default_rng([seed, _stable_hash(sample_id)])
    if budget is None:
        return Choice({t.id: int(rng.integers(zoo.n_models(t.id))) for t in zoo.types})
    kept = feasible_positions(zoo, budget)
    return Choice({t.id: kept[t.id][int(rng.integers(len(kept[t.id])))] for t in zoo.types})


def fixed_select(zoo: ModelZoo, assignment: Optional[Mapping[int, int]] = None) -> Choice:
    """Constant per-type pick; defaults to each type's first model."""
    if assignment is None:
        assignment = {t.id: 0 for t in zoo.types}
    if set(assignment) != {t.id for t in zoo.types}:
        raise InvalidChoiceError("assignment must cover exactly the zoo's types")
    for tid, j in assignment.items():
        if not 0 <= j < zoo.n_models(tid):
            raise InvalidChoiceError(f"model index {j} out of range for type {tid}")
    return Choice(dict(assignment))


def external_metric_select(zoo: ModelZoo, budget: Optional[float] = None) -> Choice:
    """Newest model per type; ties by parameter count, then lowest id."""
    kept = feasible_positions(zoo, budget) if budget is not None else None
    picks = {}
    for t in zoo.types:
        positions = kept[t.id] if kept is not None else range(zoo.n_models(t.id))
        best = min(
            positions,
            key=lambda j: (
                -zoo.models[t.id][j].release_ordinal,
                -zoo.models[t.id][j].param_count,
                zoo.models[t.id][j].id,
            ),
        )
        picks[t.id] = best
    return Choice(picks)


def global_best_select(train_dataset: Dataset, zoo: ModelZoo, budget: Optional[float] = None) -> Choice:
    """The choice with the highest mean observed status in training data."""
    obs = train_dataset.observed
    counts = obs.sum(axis=0)
    sums = (train_dataset.outcomes * obs).sum(axis=0)
    means = np.full(train_dataset.n_choices, -np.inf)
    has = counts > 0
    means[has] = sums[has] / counts[has]
    space = enumerate_choices(zoo)
    candidates = feasible_indices(space, budget)
    cand_means = means[candidates]
    if not np.any(np.isfinite(cand_means)):
        raise NoDataError("no candidate choice has any observed outcome")
    return space[int(candidates[int(np.argmax(cand_means))])]


class RandomSelector:
    name = "random"

    def __init__(self, zoo: ModelZoo, seed: int = 0):
        self.zoo = zoo
        self.seed = seed
        self.space = enumerate_choices(zoo)

    def select_choice(self, sample: Sample, budget: Optional[float] = None) -> Choice:
        return random_select(self.zoo, self.seed, sample.sample_id, budget)


class FixedSelector:
    """The scripted-pipeline default: one hard-wired model per type."""

    name = "visprog"

    def __init__(self, zoo: ModelZoo, assignment: Optional[Mapping[int, int]] = None):
        self.zoo = zoo
        self.space = enumerate_choices(zoo)
        self.choice = fixed_select(zoo, assignment)

    def select_choice(self, sample: Sample, budget: Optional[float] = None) -> Choice:
        if budget is not None:
            kept = feasible_positions(self.zoo, budget)
            for tid, j in self.choice.assignment.items():
                if j not in kept[tid]:
                    raise InfeasibleBudgetError(f"fixed model {j} for type {tid} exceeds {budget} s")
        return self.choice


class ExMetricSelector:
    name = "exmetric"

    def __init__(self, zoo: ModelZoo):
        self.zoo = zoo
        self.space = enumerate_choices(zoo)

    def select_choice(self, sample: Sample, budget: Optional[float] = None) -> Choice:
        return external_metric_select(self.zoo, budget)


class GlobalBestSelector:
    name = "global_best"

    def __init__(self, train_dataset: Dataset, zoo: ModelZoo):
        self.zoo = zoo
        self.space = enumerate_choices(zoo)
        self.train_dataset = train_dataset
        self._cache: dict[Optional[float], Choice] = {}

    def select_choice(self, sample: Sample, budget: Optional[float] = None) -> Choice:
        if budget not in self._cache:
            self._cache[budget] = global_best_select(self.train_dataset, self.zoo, budget)
        return self._cache[budget]


class OracleSelector:
    """Upper bound: reads the answer sheet for the evaluation set."""

    name = "oracle"

    def __init__(self, dataset: Dataset, zoo: ModelZoo):
        self.zoo = zoo
        self.space = enumerate_choices(zoo)
        self._rows = {s.sample_id: i for i, s in enumerate(dataset.samples)}
        self.dataset = dataset

    def select_choice(self, sample: Sample, budget: Optional[float] = None) -> Choice:
        row = self._rows[sample.sample_id]
        candidates = feasible_indices(self.space, budget)
        observed = self.dataset.observed[row, candidates]
        status = np.where(observed, self.dataset.outcomes[row, candidates], -1)
        return self.space[int(candidates[int(np.argmax(status))])]


class ScorerSelector:
    """Wraps a trained scorer (the learned method or the MLP baseline)."""

    def __init__(self, scorer, store: FeatureStore, name: str = "m3"):
        self.scorer = scorer
        self.store = store
        self.name = name
        self.zoo = scorer.zoo
        self.space = scorer.space

    def select_choice(self, sample: Sample, budget: Optional[float] = None) -> Choice:
        return select(sample, self.scorer, self.store, budget)
