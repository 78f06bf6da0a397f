"""Scorers that map (sample, choice) pairs to logits.

GraphScorer is the main method: node features assembled from the input
embedding and the chosen models' embeddings, scored by the attention
learner over the dependency edges. NcfScorer is the edge-blind contrast:
the same embeddings, mean-pooled, through a two-layer perceptron.

Both expose the same surface: `logits` for a set of choice indices with a
tape, `backward_into` accumulating flat gradients, and `get_flat` /
`set_flat` over one packed parameter vector with a fixed layout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import gat
from .errors import DimensionMismatchError
from .features import EmbeddingTable, FeatureConfig, FeatureStore, Projections
from .graph import ChoiceSpace, ModelZoo, Sample, enumerate_choices


def _elu(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def _elu_grad(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, 1.0, np.exp(np.minimum(x, 0.0)))


class _PackedParams:
    """Shared flat-vector packing over named parameter arrays."""

    def _arrays(self) -> list[np.ndarray]:
        raise NotImplementedError

    @property
    def n_params(self) -> int:
        return sum(a.size for a in self._arrays())

    def get_flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self._arrays()])

    def set_flat(self, flat: np.ndarray) -> None:
        arrays = self._arrays()
        expected = sum(a.size for a in arrays)
        if flat.shape != (expected,):
            raise DimensionMismatchError(f"flat vector has {flat.size} entries, expected {expected}")
        pos = 0
        for a in arrays:
            a[...] = flat[pos : pos + a.size].reshape(a.shape)
            pos += a.size

    def _pack_like(self, grads: list[np.ndarray]) -> np.ndarray:
        return np.concatenate([g.ravel() for g in grads])


@dataclass
class _GraphTape:
    sample: Sample
    x: np.ndarray
    js: np.ndarray  # (C, K) model index per type position
    inner: gat.ForwardTape


class GraphScorer(_PackedParams):
    """Attention scorer over the task graph; the learned selector."""

    kind = "graph"

    def __init__(
        self,
        zoo: ModelZoo,
        config: FeatureConfig,
        table: EmbeddingTable,
        proj: Projections,
        learner: gat.LearnerParams,
    ):
        self.zoo = zoo
        self.config = config
        self.table = table
        self.proj = proj
        self.learner = learner
        self.space = enumerate_choices(zoo)
        self._type_pos = {tid: p for p, tid in enumerate(self.space.type_ids)}

    @classmethod
    def init(cls, zoo: ModelZoo, config: FeatureConfig, hidden: int, seed: int) -> "GraphScorer":
        rng = np.random.default_rng(seed)
        table = EmbeddingTable.init(zoo, config.d2, rng)
        proj = Projections.init(config, rng)
        learner = gat.LearnerParams.init((config.d, hidden, hidden), rng)
        return cls(zoo, config, table, proj, learner)

    def _arrays(self) -> list[np.ndarray]:
        out = [self.table.vectors[t.id] for t in self.zoo.types]
        out += [self.proj.W1, self.proj.W2]
        for layer in self.learner.layers:
            out += [layer.W, layer.a]
        self._head_bias_box = getattr(self, "_head_bias_box", np.zeros(1))
        self._head_bias_box[0] = self.learner.head_bias
        out += [self.learner.head_weight, self._head_bias_box]
        return out

    def set_flat(self, flat: np.ndarray) -> None:
        super().set_flat(flat)
        self.learner.head_bias = float(self._head_bias_box[0])

    def logits(self, sample: Sample, store: FeatureStore, choice_indices) -> tuple[np.ndarray, _GraphTape]:
        """Score the given choice indices; returns (logits, tape)."""
        x = store.get(sample.feature_ref)
        if x.shape[0] != self.proj.W1.shape[0]:
            raise DimensionMismatchError(f"input dim {x.shape[0]} != W1 rows {self.proj.W1.shape[0]}")
        js = self.space.decode_matrix(choice_indices)
        C = js.shape[0]
        graph = sample.graph
        n = graph.n_nodes
        projected = {tid: self.table.vectors[tid] @ self.proj.W2 for tid in set(graph.node_types)}
        H = np.empty((C, n, self.config.d))
        H[:, 0, :] = x @ self.proj.W1
        for k in range(1, n):
            tid = graph.type_of(k)
            H[:, k, :] = projected[tid][js[:, self._type_pos[tid]]]
        s, inner = gat.forward(H, graph.edges, self.learner)
        return np.atleast_1d(np.asarray(s)), _GraphTape(sample=sample, x=x, js=js, inner=inner)

    def backward_into(self, tape: _GraphTape, d_logits: np.ndarray, out: np.ndarray) -> None:
        """Accumulate d(loss)/d(params) into the flat vector `out`."""
        grads, dH = gat.backward(tape.inner, np.asarray(d_logits, dtype=np.float64))
        graph = tape.sample.graph
        d = self.config.d
        d_row0 = dH[:, 0, :].sum(axis=0)
        dW1 = np.outer(tape.x, d_row0)
        d_proj2 = {tid: np.zeros((self.zoo.n_models(tid), d)) for tid in set(graph.node_types)}
        for k in range(1, graph.n_nodes):
            tid = graph.type_of(k)
            np.add.at(d_proj2[tid], tape.js[:, self._type_pos[tid]], dH[:, k, :])
        dW2 = np.zeros_like(self.proj.W2)
        d_table = {t.id: None for t in self.zoo.types}
        for tid, dp in d_proj2.items():
            d_table[tid] = dp @ self.proj.W2.T
            dW2 += self.table.vectors[tid].T @ dp
        parts = [
            d_table[t.id] if d_table[t.id] is not None else np.zeros_like(self.table.vectors[t.id])
            for t in self.zoo.types
        ]
        parts += [dW1, dW2]
        for lg in grads.layers:
            parts += [lg.W, lg.a]
        parts += [grads.head_weight, np.array([grads.head_bias])]
        out += self._pack_like(parts)


@dataclass
class _NcfTape:
    sample: Sample
    x: np.ndarray
    js: np.ndarray
    z: np.ndarray  # (C, 2d) concatenated inputs
    h_pre: np.ndarray  # (C, hidden)
    h: np.ndarray


class NcfScorer(_PackedParams):
    """Edge-blind baseline: mean-pooled embeddings through a 2-layer MLP.

    Sees which subtask types occur and which models are chosen, but not
    how the nodes are wired.
    """

    kind = "ncf"

    def __init__(
        self,
        zoo: ModelZoo,
        config: FeatureConfig,
        table: EmbeddingTable,
        proj: Projections,
        M1: np.ndarray,
        b1: np.ndarray,
        M2: np.ndarray,
        b2: float,
    ):
        self.zoo = zoo
        self.config = config
        self.table = table
        self.proj = proj
        self.M1 = M1
        self.b1 = b1
        self.M2 = M2
        self.b2 = b2
        self.space = enumerate_choices(zoo)
        self._type_pos = {tid: p for p, tid in enumerate(self.space.type_ids)}

    @classmethod
    def init(cls, zoo: ModelZoo, config: FeatureConfig, hidden: int, seed: int) -> "NcfScorer":
        rng = np.random.default_rng(seed)
        table = EmbeddingTable.init(zoo, config.d2, rng)
        proj = Projections.init(config, rng)
        b_in = 1.0 / math.sqrt(2 * config.d)
        b_h = 1.0 / math.sqrt(hidden)
        return cls(
            zoo,
            config,
            table,
            proj,
            M1=rng.uniform(-b_in, b_in, size=(2 * config.d, hidden)),
            b1=np.zeros(hidden),
            M2=rng.uniform(-b_h, b_h, size=hidden),
            b2=0.0,
        )

    def _arrays(self) -> list[np.ndarray]:
        out = [self.table.vectors[t.id] for t in self.zoo.types]
        out += [self.proj.W1, self.proj.W2, self.M1, self.b1, self.M2]
        self._b2_box = getattr(self, "_b2_box", np.zeros(1))
        self._b2_box[0] = self.b2
        out.append(self._b2_box)
        return out

    def set_flat(self, flat: np.ndarray) -> None:
        super().set_flat(flat)
        self.b2 = float(self._b2_box[0])

    def logits(self, sample: Sample, store: FeatureStore, choice_indices) -> tuple[np.ndarray, _NcfTape]:
        x = store.get(sample.feature_ref)
        if x.shape[0] != self.proj.W1.shape[0]:
            raise DimensionMismatchError(f"input dim {x.shape[0]} != W1 rows {self.proj.W1.shape[0]}")
        js = self.space.decode_matrix(choice_indices)
        C = js.shape[0]
        graph = sample.graph
        projected = {tid: self.table.vectors[tid] @ self.proj.W2 for tid in set(graph.node_types)}
        d = self.config.d
        z = np.empty((C, 2 * d))
        z[:, :d] = x @ self.proj.W1
        pooled = np.zeros((C, d))
        for k in range(1, graph.n_nodes):
            tid = graph.type_of(k)
            pooled += projected[tid][js[:, self._type_pos[tid]]]
        z[:, d:] = pooled / max(graph.L, 1)
        h_pre = z @ self.M1 + self.b1
        h = _elu(h_pre)
        s = h @ self.M2 + self.b2
        return np.atleast_1d(s), _NcfTape(sample=sample, x=x, js=js, z=z, h_pre=h_pre, h=h)

    def backward_into(self, tape: _NcfTape, d_logits: np.ndarray, out: np.ndarray) -> None:
        ds = np.asarray(d_logits, dtype=np.float64)
        graph = tape.sample.graph
        d = self.config.d
        dM2 = tape.h.T @ ds
        db2 = float(ds.sum())
        dh = ds[:, None] * self.M2
        dh_pre = dh * _elu_grad(tape.h_pre)
        dM1 = tape.z.T @ dh_pre
        db1 = dh_pre.sum(axis=0)
        dz = dh_pre @ self.M1.T
        dW1 = np.outer(tape.x, dz[:, :d].sum(axis=0))
        d_pool = dz[:, d:] / max(graph.L, 1)
        d_proj2 = {tid: np.zeros((self.zoo.n_models(tid), d)) for tid in set(graph.node_types)}
        for k in range(1, graph.n_nodes):
            tid = graph.type_of(k)
            np.add.at(d_proj2[tid], tape.js[:, self._type_pos[tid]], d_pool)
        dW2 = np.zeros_like(self.proj.W2)
        d_table = {t.id: None for t in self.zoo.types}
        for tid, dp in d_proj2.items():
            d_table[tid] = dp @ self.proj.W2.T
            dW2 += self.table.vectors[tid].T @ dp
        parts = [
            d_table[t.id] if d_table[t.id] is not None else np.zeros_like(self.table.vectors[t.id])
            for t in self.zoo.types
        ]
        parts += [dW1, dW2, dM1, db1, dM2, np.array([db2])]
        out += self._pack_like(parts)


SCORER_KINDS = {"graph": GraphScorer, "ncf": NcfScorer}


def make_scorer(kind: str, zoo: ModelZoo, config: FeatureConfig, hidden: int, seed: int):
    if kind not in SCORER_KINDS:
        raise ValueError(f"unknown scorer kind {kind!r}")
    return SCORER_KINDS[kind].init(zoo, config, hidden, seed)
