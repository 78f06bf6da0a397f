"""Argmax selection under optional time budgets, ranking, and the
feasibility filter's index arithmetic.
"""
from __future__ import annotations

import numpy as np
import pytest

from dagsel.errors import InfeasibleBudgetError
from dagsel.features import FeatureConfig, FeatureStore
from dagsel.graph import Sample, enumerate_choices
from dagsel.model import make_scorer
from dagsel.programs import parse_program
from dagsel.selection import feasible_indices, feasible_positions, rank_topk, select
from dagsel.zoos import standard_zoo

ZOO = standard_zoo(3, 2, loc_times=[0.1, 0.5, 0.9], vqa_times=[0.2, 0.6])  # C = 6
SPACE = enumerate_choices(ZOO)
CFG = FeatureConfig(d1=4, d2=4, d=6)
TEXT = "N1=LOC(object='x')\nN2=VQA(image=N1,question='q')"


def make_sample(sid="s0"):
    return Sample(sample_id=sid, category="Query", graph=parse_program(TEXT, ZOO, sid), feature_ref=sid)


def make_store(sid="s0"):
    return FeatureStore({sid: np.arange(4.0)})


class StubScorer:
    """Fixed logits per choice index; mirrors the scorer surface."""

    def __init__(self, logits):
        self._logits = np.asarray(logits, dtype=np.float64)
        self.space = SPACE
        self.zoo = ZOO

    def logits(self, sample, store, choice_indices):
        idx = np.asarray(choice_indices)
        return self._logits[idx], None


class TestFeasibility:
    def test_positions_filter_by_avg_time(self):
        kept = feasible_positions(ZOO, 0.55)
        assert kept[0] == [0, 1]  # LOC times 0.1, 0.5 fit; 0.9 does not
        assert kept[1] == [0]  # VQA 0.2 fits; 0.6 does not
        assert all(kept[t.id] == [0] for t in ZOO.types if t.id >= 2)

    def test_no_model_fits_raises(self):
        with pytest.raises(InfeasibleBudgetError):
            feasible_positions(ZOO, 0.05)

    def test_indices_none_and_inf_mean_everything(self):
        assert np.array_equal(feasible_indices(SPACE, None), np.arange(6))
        assert np.array_equal(feasible_indices(SPACE, float("inf")), np.arange(6))

    def test_indices_are_original_space_indices(self):
        idx = feasible_indices(SPACE, 0.55)
        # LOC j in {0,1} x VQA j=0 x deterministic singletons
        expected = [SPACE.index_of(c) for c in SPACE if c.assignment[0] in (0, 1) and c.assignment[1] == 0]
        assert np.array_equal(idx, np.array(sorted(expected)))

    def test_indices_sorted_ascending(self):
        idx = feasible_indices(SPACE, 0.65)
        assert np.all(np.diff(idx) > 0)


class TestSelect:
    def test_picks_argmax(self):
        scorer = StubScorer([0.1, 0.9, -0.3, 0.2, 0.5, 0.89])
        choice = select(make_sample(), scorer, make_store(), None)
        assert SPACE.index_of(choice) == 1

    def test_tie_goes_to_lowest_index(self):
        scorer = StubScorer([0.5, 0.5, 0.5, 0.5, 0.5, 0.5])
        assert SPACE.index_of(select(make_sample(), scorer, make_store())) == 0

    def test_budget_restricts_argmax(self):
        # global best is index 5 but the budget forbids it
        scorer = StubScorer([0.0, 0.1, 0.2, 0.3, 0.4, 5.0])
        idx_no = SPACE.index_of(select(make_sample(), scorer, make_store(), budget=None))
        idx_tight = SPACE.index_of(select(make_sample(), scorer, make_store(), budget=0.55))
        assert idx_no == 5
        assert idx_tight in set(feasible_indices(SPACE, 0.55).tolist())

    def test_budget_never_returns_over_budget_model(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            scorer = StubScorer(rng.standard_normal(6))
            choice = select(make_sample(), scorer, make_store(), budget=0.55)
            for tid, j in choice.assignment.items():
                assert ZOO.models[tid][j].avg_exec_time <= 0.55

    def test_infeasible_budget_propagates(self):
        scorer = StubScorer(np.zeros(6))
        with pytest.raises(InfeasibleBudgetError):
            select(make_sample(), scorer, make_store(), budget=0.01)

    def test_real_scorer_end_to_end(self):
        scorer = make_scorer("graph", ZOO, CFG, hidden=6, seed=0)
        choice = select(make_sample(), scorer, make_store())
        logits, _ = scorer.logits(make_sample(), make_store(), np.arange(6))
        assert SPACE.index_of(choice) == int(np.argmax(logits))


class TestRankTopk:
    def test_descending_order(self):
        scorer = StubScorer([0.3, 0.9, -1.0, 0.5, 0.0, 0.2])
        ranked = rank_topk(make_sample(), scorer, make_store(), k=3)
        assert [SPACE.index_of(c) for c, _ in ranked] == [1, 3, 0]
        scores = [s for _, s in ranked]
        assert scores == sorted(scores, reverse=True)

    def test_k_clamps_to_space(self):
        scorer = StubScorer(np.arange(6.0))
        assert len(rank_topk(make_sample(), scorer, make_store(), k=100)) == 6

    def test_ties_stable_by_index(self):
        scorer = StubScorer([1.0, 1.0, 0.0, 1.0, 0.0, 0.0])
        ranked = rank_topk(make_sample(), scorer, make_store(), k=3)
        assert [SPACE.index_of(c) for c, _ in ranked] == [0, 1, 3]

    def test_k_below_one_rejected(self):
        with pytest.raises(ValueError):
            rank_topk(make_sample(), StubScorer(np.zeros(6)), make_store(), k=0)
