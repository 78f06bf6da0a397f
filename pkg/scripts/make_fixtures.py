"""Regenerate the committed synthetic benchmark specs.

Three planted datasets back the test suite:
  high_separation  three well-separated feature clusters, rotating model
                   preferences per (cluster, category, type); headroom for
                   the selector ordering oracle > graph > pooled > global
                   best > random
  edge_signal      one cluster, two categories with identical type
                   multisets but different wiring, opposite preferred
                   models; only edge-aware scorers can tell them apart
  slow_best        strongest models are slow, so tightening the time
                   budget forces progressively weaker choices

Run from the repo root: python3 scripts/make_fixtures.py
"""
from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from dagsel.bench import SynthSpec  # noqa: E402
from dagsel.zoos import DETERMINISTIC_TYPES, MODEL_BACKED_TYPES  # noqa: E402

SPEC_DIR = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "specs"

# Category templates. Query/Choose share one type multiset with different
# shapes, Compare/Verify share another; Logical stands alone. Pooled
# (edge-blind) scorers cannot separate the members of a shared pair.
TEMPLATES = {
    "Query": [
        "N1=LOC(object='target')\nN2=VQA(image=N1,question='what is it')\nN3=EVAL(expr='{N2} != none')",
    ],
    "Choose": [
        "N1=LOC(object='options')\nN2=VQA(image=IMAGE,question='which one')\nN3=EVAL(expr='{N1} and {N2}')",
    ],
    "Compare": [
        "N1=LOC(object='pair')\nN2=VQA(image=N1,question='left size')\nN3=VQA(image=N1,question='right size')\nN4=EVAL(expr='{N2} > {N3}')",
    ],
    "Verify": [
        "N1=LOC(object='claim region')\nN2=VQA(image=N1,question='color')\nN3=VQA(image=N2,question='match')\nN4=EVAL(expr='{N3} == yes')",
    ],
    "Logical": [
        "N1=LOC(object='group')\nN2=CROP(box=N1)\nN3=COUNT(box=N2)\nN4=VQA(image=N2,question='all same')\nN5=EVAL(expr='{N3} > 1 and {N4} == yes')",
    ],
}

# Members of a confusable pair sit at adjacent indices, so their
# preferred models differ for both rotation moduli (n_t - 1 = 3 and 2).
CATEGORY_INDEX = {"Choose": 0, "Query": 1, "Compare": 2, "Verify": 3, "Logical": 4}


def rotating_competence(
    n_clusters: int,
    categories: dict,
    n_models: dict,
    good: float,
    preferred: float,
    poor: float,
) -> dict:
    """Model 0 is uniformly decent; the preferred slot rotates with
    (cluster, category, type) so no single choice wins everywhere and
    edge-blind scorers cannot satisfy both members of a confusable pair."""
    table: dict = {}
    for c in range(n_clusters):
        per_cat: dict = {}
        for cat in categories:
            g = CATEGORY_INDEX[cat]
            per_type = {}
            for t, (type_name, n_t) in enumerate(sorted(n_models.items())):
                offsets = [poor] * n_t
                offsets[0] = good
                offsets[1 + (c + g + t) % (n_t - 1)] = preferred
                per_type[type_name] = offsets
            per_cat[cat] = per_type
        table[str(c)] = per_cat
    return table


def high_separation_spec() -> SynthSpec:
    return SynthSpec(
        n_samples=2000,
        seed=0,
        categories=dict(TEMPLATES),
        competence=rotating_competence(
            n_clusters=3,
            categories=TEMPLATES,
            n_models={"LOC": 4, "VQA": 3},
            good=0.6,
            preferred=2.8,
            poor=-1.6,
        ),
        d1=16,
        n_clusters=3,
        separation=6.0,
        feature_noise=1.0,
        base_logit=-1.0,
        outcome_noise=0.3,
        n_loc=4,
        n_vqa=3,
    )


def edge_signal_spec() -> SynthSpec:
    # Same multiset {LOC, VQA, VQA, EVAL}; diamond vs chain wiring.
    categories = {
        "Compare": [
            "N1=LOC(object='pair')\nN2=VQA(image=N1,question='left')\nN3=VQA(image=N1,question='right')\nN4=EVAL(expr='{N2} > {N3}')",
        ],
        "Verify": [
            "N1=LOC(object='claim')\nN2=VQA(image=N1,question='color')\nN3=VQA(image=N2,question='match')\nN4=EVAL(expr='{N3} == yes')",
        ],
    }
    competence = {
        "0": {
            "Compare": {"VQA": [-2.0, 3.0, -2.0]},
            "Verify": {"VQA": [-2.0, -2.0, 3.0]},
        }
    }
    return SynthSpec(
        n_samples=1200,
        seed=1,
        categories=categories,
        competence=competence,
        d1=16,
        n_clusters=1,
        separation=0.0,
        feature_noise=1.0,
        base_logit=-0.5,
        outcome_noise=0.3,
        n_loc=2,
        n_vqa=3,
    )


def slow_best_spec() -> SynthSpec:
    # Stronger models cost more wall-clock time; budget filters bite at
    # 0.5 (drops VQA 1) and 0.3 (drops LOC 1 as well).
    categories = {
        "Query": [
            "N1=LOC(object='target')\nN2=VQA(image=N1,question='what is it')",
        ],
    }
    competence = {
        "0": {
            "Query": {
                "LOC": [0.0, 1.2],
                "VQA": [-2.0, 3.5],
            }
        }
    }
    return SynthSpec(
        n_samples=800,
        seed=2,
        categories=categories,
        competence=competence,
        d1=16,
        n_clusters=1,
        separation=0.0,
        feature_noise=1.0,
        base_logit=-0.2,
        outcome_noise=0.3,
        n_loc=2,
        n_vqa=2,
        loc_times=[0.1, 0.4],
        vqa_times=[0.1, 0.8],
    )


def main() -> None:
    SPEC_DIR.mkdir(parents=True, exist_ok=True)
    for name, spec in (
        ("high_separation", high_separation_spec()),
        ("edge_signal", edge_signal_spec()),
        ("slow_best", slow_best_spec()),
    ):
        path = SPEC_DIR / f"{name}.json"
        spec.save(path)
        print(f"wrote {path}")
    # Sanity: every template touches only known types.
    known = set(MODEL_BACKED_TYPES) | set(DETERMINISTIC_TYPES)
    for cat, templates in TEMPLATES.items():
        for text in templates:
            for line in text.splitlines():
                fn = line.split("=", 1)[1].split("(", 1)[0]
                assert fn in known, (cat, fn)


if __name__ == "__main__":
    main()
