"""Input embeddings, the learnable model-embedding table, and the shared
projection into node-feature space.

Input embeddings arrive precomputed from a file (one JSON object per line
with `sample_id` and `embedding`); the engine never runs an encoder
itself. The table and both projections are trained jointly.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import (
    DimensionMismatchError,
    DuplicateIdError,
    FormatError,
    MissingFeatureError,
)
from .graph import Choice, ModelZoo, Sample


@dataclass(frozen=True)
class FeatureConfig:
    d1: int
    d2: int = 32
    d: int = 64

    def __post_init__(self):
        if min(self.d1, self.d2, self.d) <= 0:
            raise ValueError("all feature dimensions must be positive")


class FeatureStore:
    """Read-only map from sample_id to its input embedding x_i."""

    def __init__(self, vectors: Mapping[str, np.ndarray]):
        dim = None
        store = {}
        for sid, vec in vectors.items():
            arr = np.asarray(vec, dtype=np.float64)
            if arr.ndim != 1:
                raise FormatError(f"embedding for {sid!r} is not a flat vector")
            if not np.all(np.isfinite(arr)):
                raise FormatError(f"embedding for {sid!r} has non-finite entries")
            if dim is None:
                dim = arr.shape[0]
            elif arr.shape[0] != dim:
                raise DimensionMismatchError(f"{sid!r} has dim {arr.shape[0]}, expected {dim}")
            arr.setflags(write=False)
            store[sid] = arr
        if dim is None:
            raise FormatError("feature store has no records")
        self._store = store
        self.dim = dim

    def __len__(self) -> int:
        return len(self._store)

    def __contains__(self, sample_id: str) -> bool:
        return sample_id in self._store

    def ids(self):
        return self._store.keys()

    def get(self, sample_id: str) -> np.ndarray:
        try:
            return self._store[sample_id]
        except KeyError:
            raise MissingFeatureError(f"no input embedding for {sample_id!r}") from None


def load_features(path) -> FeatureStore:
    """Read the newline-delimited ingestion format.

    Every line is an object with `sample_id` (string) and `embedding`
    (array of finite reals); all arrays must share one length.
    """
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as err:
                raise FormatError(f"line {line_no}: invalid JSON ({err.msg})") from None
            if not isinstance(rec, dict) or "sample_id" not in rec or "embedding" not in rec:
                raise FormatError(f"line {line_no}: expected sample_id and embedding fields")
            sid = rec["sample_id"]
            emb = rec["embedding"]
            if not isinstance(sid, str):
                raise FormatError(f"line {line_no}: sample_id must be a string")
            if not isinstance(emb, list) or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in emb
            ):
                raise FormatError(f"line {line_no}: embedding must be an array of numbers")
            arr = np.asarray(emb, dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise FormatError(f"line {line_no}: embedding has non-finite entries")
            if dim is None:
                dim = arr.shape[0]
            elif arr.shape[0] != dim:
                raise DimensionMismatchError(f"line {line_no}: dim {arr.shape[0]} != {dim}")
            if sid in vectors:
                raise DuplicateIdError(f"line {line_no}: duplicate sample_id {sid!r}")
            vectors[sid] = arr
    if dim is None:
        raise FormatError(f"{path}: no feature records")
    return FeatureStore(vectors)


def save_features(store: FeatureStore, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sid in store.ids():
            rec = {"sample_id": sid, "embedding": [float(x) for x in store.get(sid)]}
            fh.write(json.dumps(rec) + "\n")


@dataclass
class EmbeddingTable:
    """One learnable d2-vector per model, grouped by subtask type.

    Deterministic pseudo-models get an entry too, so structurally distinct
    graphs differ in H even where no real model choice exists.
    """

    vectors: dict[int, np.ndarray]

    @property
    def d2(self) -> int:
        return next(iter(self.vectors.values())).shape[1]

    @classmethod
    def init(cls, zoo: ModelZoo, d2: int, rng: np.random.Generator) -> "EmbeddingTable":
        # A lookup is a linear map from a one-hot over the type's models,
        # so its fan-in is n_t, not d2.
        vecs = {}
        for t in zoo.types:
            n_t = zoo.n_models(t.id)
            bound = 1.0 / math.sqrt(n_t)
            vecs[t.id] = rng.uniform(-bound, bound, size=(n_t, d2))
        return cls(vectors=vecs)

    def copy(self) -> "EmbeddingTable":
        return EmbeddingTable({tid: arr.copy() for tid, arr in self.vectors.items()})


@dataclass
class Projections:
    """W1 maps input embeddings, W2 maps model embeddings, into R^d."""

    W1: np.ndarray
    W2: np.ndarray

    @property
    def d(self) -> int:
        return self.W1.shape[1]

    @classmethod
    def init(cls, config: FeatureConfig, rng: np.random.Generator) -> "Projections":
        b1 = 1.0 / math.sqrt(config.d1)
        b2 = 1.0 / math.sqrt(config.d2)
        return cls(
            W1=rng.uniform(-b1, b1, size=(config.d1, config.d)),
            W2=rng.uniform(-b2, b2, size=(config.d2, config.d)),
        )

    def copy(self) -> "Projections":
        return Projections(W1=self.W1.copy(), W2=self.W2.copy())


def init_parameters(zoo: ModelZoo, config: FeatureConfig, seed: int) -> tuple[EmbeddingTable, Projections]:
    """Seed-determined uniform init on [-1/sqrt(fan_in), +1/sqrt(fan_in)]."""
    rng = np.random.default_rng(seed)
    table = EmbeddingTable.init(zoo, config.d2, rng)
    proj = Projections.init(config, rng)
    return table, proj


def assemble(
    sample: Sample,
    choice: Choice,
    table: EmbeddingTable,
    projections: Projections,
    store: FeatureStore,
) -> np.ndarray:
    """Node-feature matrix H for one (sample, choice) pair.

    Row 0 carries the projected input embedding; row k carries the
    projected embedding of the model chosen for node k's subtask type.
    """
    x = store.get(sample.feature_ref)
    if x.shape[0] != projections.W1.shape[0]:
        raise DimensionMismatchError(
            f"input embedding dim {x.shape[0]} != W1 rows {projections.W1.shape[0]}"
        )
    L = sample.graph.L
    H = np.empty((L + 1, projections.d))
    H[0] = x @ projections.W1
    for k in range(1, L + 1):
        tid = sample.graph.type_of(k)
        j = choice.model_index(tid)
        H[k] = table.vectors[tid][j] @ projections.W2
    return H
