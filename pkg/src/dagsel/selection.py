"""Test-time selection: argmax over scored choices, optionally under a
per-model execution-time budget.

The budget rule drops every model whose average execution time exceeds
the budget, rebuilds the choice space from the survivors, and takes the
argmax there. Returned choices always index into the original zoo.
"""
from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .errors import InfeasibleBudgetError
from .features import FeatureStore
from .graph import Choice, ChoiceSpace, ModelZoo, Sample


def feasible_positions(zoo: ModelZoo, budget: float) -> dict[int, list[int]]:
    """Surviving model positions per type under the budget filter."""
    out = {}
    for t in zoo.types:
        kept = [j for j, m in enumerate(zoo.models[t.id]) if m.avg_exec_time <= budget]
        if not kept:
            raise InfeasibleBudgetError(f"no model of type {t.name!r} fits within {budget} s")
        out[t.id] = kept
    return out


def feasible_indices(space: ChoiceSpace, budget: Optional[float]) -> np.ndarray:
    """Original-space indices of all budget-feasible choices, in order."""
    if budget is None or math.isinf(budget):
        return np.arange(space.size)
    kept = feasible_positions(space.zoo, budget)
    idx = np.zeros(1, dtype=np.int64)
    for tid in space.type_ids:
        radix = space.zoo.n_models(tid)
        idx = (idx[:, None] * radix + np.asarray(kept[tid], dtype=np.int64)[None, :]).ravel()
    return idx


def score_all(sample: Sample, scorer, store: FeatureStore) -> np.ndarray:
    """One logit per choice, in choice-space order."""
    logits, _ = scorer.logits(sample, store, np.arange(scorer.space.size))
    return logits


def select(sample: Sample, scorer, store: FeatureStore, budget: Optional[float] = None) -> Choice:
    """Highest-scoring feasible choice; ties go to the lowest index."""
    idx = feasible_indices(scorer.space, budget)
    logits, _ = scorer.logits(sample, store, idx)
    return scorer.space[int(idx[int(np.argmax(logits))])]


def rank_topk(sample: Sample, scorer, store: FeatureStore, k: int) -> list[tuple[Choice, float]]:
    """Top-k choices by logit, descending, stable on ties."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    logits = score_all(sample, scorer, store)
    order = np.argsort(-logits, kind="stable")[: min(k, logits.size)]
    return [(scorer.space[int(i)], float(logits[i])) for i in order]
