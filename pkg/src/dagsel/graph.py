"""Core data model: subtask types, model zoo, task graphs, joint choices,
and recorded execution outcomes.

Everything here is immutable after construction, so concurrent reads are
safe. Node 0 of every task graph is the virtual input node; real subtask
nodes are numbered 1..L.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Iterator, Mapping, Optional, Sequence

import numpy as np

from .errors import (
    CycleError,
    DanglingEdgeError,
    InvalidChoiceError,
    NoObservationError,
)

VIRTUAL_NODE = 0

CATEGORIES = ("Query", "Choose", "Compare", "Verify", "Logical")


class Kind(Enum):
    MODEL_BACKED = "model_backed"
    DETERMINISTIC = "deterministic"


@dataclass(frozen=True)
class SubtaskType:
    id: int
    name: str
    kind: Kind = Kind.MODEL_BACKED


@dataclass(frozen=True)
class ModelInfo:
    """Metadata for one candidate model of a subtask type.

    release_ordinal is a publication date expressed as days since epoch so
    "most recent" comparisons are plain integer comparisons.
    """

    id: int
    subtask_type: int
    name: str
    release_ordinal: int = 0
    param_count: int = 0
    avg_exec_time: float = 0.0

    def __post_init__(self):
        if self.avg_exec_time < 0:
            raise ValueError(f"avg_exec_time must be >= 0, got {self.avg_exec_time}")


class ModelZoo:
    """Candidate models per subtask type, in a stable deterministic order.

    Deterministic subtask types carry exactly one pseudo-model so they
    contribute a factor of 1 to the choice space and still own a learnable
    embedding.
    """

    def __init__(self, types: Sequence[SubtaskType], models: Mapping[int, Sequence[ModelInfo]]):
        self.types = tuple(sorted(types, key=lambda t: t.id))
        names = [t.name for t in self.types]
        if len(set(names)) != len(names):
            raise ValueError("subtask type names must be unique within a zoo")
        if len({t.id for t in self.types}) != len(self.types):
            raise ValueError("subtask type ids must be unique within a zoo")
        by_type = {}
        for t in self.types:
            entries = tuple(models.get(t.id, ()))
            if not entries:
                raise ValueError(f"type {t.name!r} has no models (n_t >= 1 required)")
            if t.kind is Kind.DETERMINISTIC and len(entries) != 1:
                raise ValueError(f"deterministic type {t.name!r} must hold exactly one pseudo-model")
            if len({m.id for m in entries}) != len(entries):
                raise ValueError(f"model ids within type {t.name!r} must be unique")
            for m in entries:
                if m.subtask_type != t.id:
                    raise ValueError(f"model {m.name!r} is tagged with type {m.subtask_type}, not {t.id}")
            by_type[t.id] = entries
        self.models = MappingProxyType(by_type)
        self._by_name = MappingProxyType({t.name: t for t in self.types})

    @property
    def K(self) -> int:
        return len(self.types)

    def n_models(self, type_id: int) -> int:
        return len(self.models[type_id])

    def type_by_name(self, name: str) -> SubtaskType:
        return self._by_name[name]

    def has_type(self, name: str) -> bool:
        return name in self._by_name

    def type_by_id(self, type_id: int) -> SubtaskType:
        for t in self.types:
            if t.id == type_id:
                return t
        raise KeyError(type_id)

    def model(self, type_id: int, index: int) -> ModelInfo:
        return self.models[type_id][index]

    def total_models(self) -> int:
        return sum(len(v) for v in self.models.values())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ModelZoo):
            return NotImplemented
        return self.types == other.types and dict(self.models) == dict(other.models)

    def __hash__(self) -> int:
        return hash((self.types, tuple(sorted(self.models.items()))))


@dataclass(frozen=True)
class TaskGraph:
    """Augmented dependency DAG of one decomposed task.

    node_types[k-1] is the subtask type id of node k (k = 1..L); node 0 is
    the virtual input node and has no type. Edges are (u, v) pairs meaning
    v consumes u's output.
    """

    sample_id: str
    node_types: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]

    @property
    def L(self) -> int:
        return len(self.node_types)

    @property
    def n_nodes(self) -> int:
        return self.L + 1

    def type_of(self, node: int) -> int:
        if node == VIRTUAL_NODE:
            raise ValueError("virtual node has no subtask type")
        return self.node_types[node - 1]


class Choice:
    """One joint assignment: a model index per subtask type."""

    __slots__ = ("_items",)

    def __init__(self, assignment: Mapping[int, int]):
        self._items = tuple(sorted(assignment.items()))

    @property
    def assignment(self) -> dict[int, int]:
        return dict(self._items)

    def model_index(self, type_id: int) -> int:
        for tid, j in self._items:
            if tid == type_id:
                return j
        raise KeyError(type_id)

    def __eq__(self, other) -> bool:
        return isinstance(other, Choice) and self._items == other._items

    def __hash__(self) -> int:
        return hash(self._items)

    def __repr__(self) -> str:
        inner = ", ".join(f"{t}:{j}" for t, j in self._items)
        return f"Choice({{{inner}}})"


class ChoiceSpace:
    """All joint assignments of a zoo, in lexicographic order.

    Order is over model-index tuples read in ascending type-id order, so a
    choice's index is stable across runs and file reloads.
    """

    def __init__(self, zoo: ModelZoo):
        self.zoo = zoo
        self.type_ids = tuple(t.id for t in zoo.types)
        self._radices = tuple(zoo.n_models(tid) for tid in self.type_ids)
        self.size = int(np.prod(self._radices)) if self._radices else 1

    def __len__(self) -> int:
        return self.size

    def __getitem__(self, index: int) -> Choice:
        if not 0 <= index < self.size:
            raise IndexError(index)
        rem = index
        js = []
        for radix in reversed(self._radices):
            js.append(rem % radix)
            rem //= radix
        return Choice(dict(zip(self.type_ids, reversed(js))))

    def __iter__(self) -> Iterator[Choice]:
        for combo in itertools.product(*(range(r) for r in self._radices)):
            yield Choice(dict(zip(self.type_ids, combo)))

    def index_of(self, choice: Choice) -> int:
        index = 0
        assignment = choice.assignment
        if set(assignment) != set(self.type_ids):
            raise InvalidChoiceError(f"choice keys {sorted(assignment)} != zoo types {sorted(self.type_ids)}")
        for tid, radix in zip(self.type_ids, self._radices):
            j = assignment[tid]
            if not 0 <= j < radix:
                raise InvalidChoiceError(f"model index {j} out of range for type {tid} (n={radix})")
            index = index * radix + j
        return index

    def model_indices(self, index: int) -> tuple[int, ...]:
        """Model-index tuple in type-id order, without building a Choice."""
        rem = index
        js = [0] * len(self._radices)
        for pos in range(len(self._radices) - 1, -1, -1):
            js[pos] = rem % self._radices[pos]
            rem //= self._radices[pos]
        return tuple(js)

    def decode_matrix(self, indices) -> np.ndarray:
        """Model indices for many choices at once: shape (len(indices), K)."""
        rem = np.asarray(indices, dtype=np.int64)
        if rem.size and (rem.min() < 0 or rem.max() >= self.size):
            raise InvalidChoiceError("choice index out of range")
        out = np.empty((rem.shape[0], len(self._radices)), dtype=np.int64)
        for pos in range(len(self._radices) - 1, -1, -1):
            out[:, pos] = rem % self._radices[pos]
            rem = rem // self._radices[pos]
        return out


def enumerate_choices(zoo: ModelZoo) -> ChoiceSpace:
    """The full Cartesian product of per-type model choices."""
    return ChoiceSpace(zoo)


@dataclass(frozen=True)
class ExecutionRecord:
    sample_id: str
    choice_index: int
    status: int
    exec_time: Optional[float] = None

    def __post_init__(self):
        if self.status not in (0, 1):
            raise ValueError(f"status must be 0 or 1, got {self.status}")


@dataclass(frozen=True)
class Sample:
    sample_id: str
    category: str
    graph: TaskGraph
    feature_ref: str

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")


@dataclass(frozen=True)
class Dataset:
    """Samples plus the N x |C| outcome grid and its observation mask.

    Entries where observed is False are never read as outcomes; times is
    NaN wherever no execution time was recorded.
    """

    samples: tuple[Sample, ...]
    outcomes: np.ndarray
    observed: np.ndarray
    times: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        n, c = self.outcomes.shape
        if len(self.samples) != n:
            raise ValueError(f"{len(self.samples)} samples but {n} outcome rows")
        if self.observed.shape != (n, c):
            raise ValueError("observed mask shape differs from outcomes")
        if self.times is None:
            object.__setattr__(self, "times", np.full((n, c), np.nan))
        elif self.times.shape != (n, c):
            raise ValueError("times shape differs from outcomes")
        for arr in (self.outcomes, self.observed, self.times):
            arr.setflags(write=False)

    @property
    def n_samples(self) -> int:
        return len(self.samples)

    @property
    def n_choices(self) -> int:
        return self.outcomes.shape[1]

    def row_of(self, sample_id: str) -> int:
        for i, s in enumerate(self.samples):
            if s.sample_id == sample_id:
                return i
        raise KeyError(sample_id)

    def subset(self, rows: Sequence[int]) -> "Dataset":
        idx = list(rows)
        return Dataset(
            samples=tuple(self.samples[i] for i in idx),
            outcomes=self.outcomes[idx].copy(),
            observed=self.observed[idx].copy(),
            times=self.times[idx].copy(),
        )


def validate_and_topo_sort(graph: TaskGraph) -> list[int]:
    """Topological order with node 0 first; ties broken by node index.

    Raises DanglingEdgeError for out-of-range indices and CycleError naming
    one edge on a cycle.
    """
    n = graph.n_nodes
    for (u, v) in graph.edges:
        if not (0 <= u < n and 0 <= v < n):
            raise DanglingEdgeError(f"edge ({u}, {v}) references a node outside 0..{n - 1}")
        if v == VIRTUAL_NODE:
            raise DanglingEdgeError(f"edge ({u}, {v}) points into the virtual input node")
    indeg = [0] * n
    out = [[] for _ in range(n)]
    for (u, v) in graph.edges:
        indeg[v] += 1
        out[u].append(v)
    ready = [k for k in range(n) if indeg[k] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        k = heapq.heappop(ready)
        order.append(k)
        for v in sorted(out[k]):
            indeg[v] -= 1
            if indeg[v] == 0:
                heapq.heappush(ready, v)
    if len(order) < n:
        remaining = set(range(n)) - set(order)
        edge = _find_cycle_edge(graph.edges, remaining)
        raise CycleError(f"graph has a cycle through edge {edge}")
    return order


def _find_cycle_edge(edges, remaining) -> tuple[int, int]:
    # Every remaining node has an in-edge from another remaining node, so a
    # backward walk must revisit a node; the closing edge lies on a cycle.
    pred = {}
    for (u, v) in edges:
        if u in remaining and v in remaining:
            pred.setdefault(v, u)
    cur = min(remaining)
    seen = {cur}
    while True:
        nxt = pred[cur]
        if nxt in seen:
            return (nxt, cur)
        seen.add(nxt)
        cur = nxt


def augment_virtual_node(graph: TaskGraph) -> TaskGraph:
    """Wire node 0 to every subtask node that has no other inputs.

    Idempotent: nodes already fed by any edge (including from node 0) are
    left alone.
    """
    has_input = {v for (_, v) in graph.edges}
    new_edges = [(VIRTUAL_NODE, k) for k in range(1, graph.n_nodes) if k not in has_input]
    if not new_edges:
        return graph
    return TaskGraph(
        sample_id=graph.sample_id,
        node_types=graph.node_types,
        edges=tuple(sorted(set(graph.edges) | set(new_edges))),
    )


def executable_ratio(dataset: Dataset, sample_index: int) -> float:
    """Observed success fraction for one sample."""
    mask = dataset.observed[sample_index]
    n_obs = int(mask.sum())
    if n_obs == 0:
        raise NoObservationError(f"sample {dataset.samples[sample_index].sample_id} has no observed outcomes")
    return float(dataset.outcomes[sample_index][mask].sum()) / n_obs


def filter_degenerate(dataset: Dataset) -> Dataset:
    """Drop samples whose observed outcomes are all-success or all-fail.

    Samples with no observed entries are dropped too: there is nothing to
    rank. The survivors all have at least one success and one failure, so
    an oracle selector scores exactly 1.0 on them.
    """
    keep = []
    for i in range(dataset.n_samples):
        mask = dataset.observed[i]
        if not mask.any():
            continue
        vals = dataset.outcomes[i][mask]
        if vals.min() == 0 and vals.max() == 1:
            keep.append(i)
    return dataset.subset(keep)
