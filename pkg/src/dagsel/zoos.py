"""Factory for the standard nine-type zoo used by the benchmark domain.

Two types are model-backed (LOC, VQA); the other seven are deterministic
operators that hold a single pseudo-model each, so only LOC and VQA
contribute to the joint choice count.
"""
from __future__ import annotations

from typing import Optional, Sequence

from .errors import FormatError
from .graph import Kind, ModelInfo, ModelZoo, SubtaskType

MODEL_BACKED_TYPES = ("LOC", "VQA")
DETERMINISTIC_TYPES = ("EVAL", "COUNT", "CROP", "CROPLEFT", "CROPRIGHT", "CROPABOVE", "CROPBELOW")


def standard_zoo(
    n_loc: int = 10,
    n_vqa: int = 7,
    loc_times: Optional[Sequence[float]] = None,
    vqa_times: Optional[Sequence[float]] = None,
) -> ModelZoo:
    """Build the LOC x VQA zoo plus the seven deterministic operators.

    Optional per-model average execution times feed the budget filter;
    they default to zero (no model is ever excluded).
    """
    counts = {"LOC": n_loc, "VQA": n_vqa}
    times = {"LOC": loc_times, "VQA": vqa_times}
    types = []
    models = {}
    tid = 0
    for name in MODEL_BACKED_TYPES:
        types.append(SubtaskType(id=tid, name=name, kind=Kind.MODEL_BACKED))
        per_model = times[name]
        if per_model is not None and len(per_model) != counts[name]:
            raise ValueError(f"{name}: {len(per_model)} times for {counts[name]} models")
        models[tid] = [
            ModelInfo(
                id=j,
                subtask_type=tid,
                name=f"{name.lower()}-{j}",
                release_ordinal=j,
                param_count=50 * (j + 1),
                avg_exec_time=0.0 if per_model is None else float(per_model[j]),
            )
            for j in range(counts[name])
        ]
        tid += 1
    for name in DETERMINISTIC_TYPES:
        types.append(SubtaskType(id=tid, name=name, kind=Kind.DETERMINISTIC))
        models[tid] = [ModelInfo(id=0, subtask_type=tid, name=f"{name.lower()}-op")]
        tid += 1
    return ModelZoo(types, models)


def zoo_to_obj(zoo: ModelZoo) -> dict:
    """JSON-ready description of a zoo; inverse of zoo_from_obj."""
    return {
        "types": [{"id": t.id, "name": t.name, "kind": t.kind.value} for t in zoo.types],
        "models": {
            str(t.id): [
                {
                    "id": m.id,
                    "name": m.name,
                    "release_ordinal": m.release_ordinal,
                    "param_count": m.param_count,
                    "avg_exec_time": m.avg_exec_time,
                }
                for m in zoo.models[t.id]
            ]
            for t in zoo.types
        },
    }


def zoo_from_obj(obj: dict) -> ModelZoo:
    try:
        types = [SubtaskType(id=t["id"], name=t["name"], kind=Kind(t["kind"])) for t in obj["types"]]
        models = {
            int(tid): [
                ModelInfo(
                    id=m["id"],
                    subtask_type=int(tid),
                    name=m["name"],
                    release_ordinal=m.get("release_ordinal", 0),
                    param_count=m.get("param_count", 0),
                    avg_exec_time=m.get("avg_exec_time", 0.0),
                )
                for m in entries
            ]
            for tid, entries in obj["models"].items()
        }
        return ModelZoo(types, models)
    except (KeyError, TypeError, ValueError) as err:
        raise FormatError(f"malformed zoo description: {err}") from None
