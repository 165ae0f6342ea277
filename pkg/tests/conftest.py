import importlib.resources
import json
import random

import pytest

from cibpath.model import parse_study_spec
from cibpath.simulate import EnsembleResult, Pathway, RunRecord


def two_desc_document(extra=None):
    """The hand-checked 2x2 fixture: a 2-cycle and two fixed points."""
    doc = {
        "descriptors": [
            {"id": "A", "name": "A", "states": ["A1", "A2"]},
            {"id": "B", "name": "B", "states": ["B1", "B2"]},
        ],
        "cim": [
            {"source": "A", "source_state": 0, "target": "B", "target_state": 0, "score": 2, "confidence": 5},
            {"source": "A", "source_state": 0, "target": "B", "target_state": 1, "score": -2, "confidence": 5},
            {"source": "A", "source_state": 1, "target": "B", "target_state": 0, "score": -2, "confidence": 5},
            {"source": "A", "source_state": 1, "target": "B", "target_state": 1, "score": 2, "confidence": 5},
            {"source": "B", "source_state": 0, "target": "A", "target_state": 0, "score": 1, "confidence": 5},
            {"source": "B", "source_state": 0, "target": "A", "target_state": 1, "score": -1, "confidence": 5},
            {"source": "B", "source_state": 1, "target": "A", "target_state": 0, "score": -1, "confidence": 5},
            {"source": "B", "source_state": 1, "target": "A", "target_state": 1, "score": 1, "confidence": 5},
        ],
        "baseline": {"A": 0, "B": 0},
        "time_grid": [2025, 2030, 2035],
    }
    if extra:
        doc.update(extra)
    return doc


@pytest.fixture
def fixture_spec():
    return parse_study_spec(two_desc_document())


@pytest.fixture
def mini_spec_path():
    return str(importlib.resources.files("cibpath") / "fixtures" / "mini_study.json")


@pytest.fixture
def mini_spec(mini_spec_path):
    with open(mini_spec_path) as fh:
        return parse_study_spec(json.load(fh))


def random_spec_document(rng: random.Random, max_descriptors=6, max_states=3, min_states=2):
    """Random small study spec with integer scores in [-3, 3] and no rules."""
    n = rng.randint(2, max_descriptors)
    descriptors = []
    for i in range(n):
        k = rng.randint(min_states, max_states)
        descriptors.append(
            {"id": f"D{i}", "name": f"D{i}", "states": [f"s{j}" for j in range(k)]}
        )
    cells = []
    for i, src in enumerate(descriptors):
        for j, tgt in enumerate(descriptors):
            if i == j:
                continue
            for si in range(len(src["states"])):
                for ti in range(len(tgt["states"])):
                    cells.append(
                        {
                            "source": src["id"],
                            "source_state": si,
                            "target": tgt["id"],
                            "target_state": ti,
                            "score": rng.randint(-3, 3),
                            "confidence": rng.randint(1, 5),
                        }
                    )
    baseline = {d["id"]: rng.randrange(len(d["states"])) for d in descriptors}
    return {
        "descriptors": descriptors,
        "cim": cells,
        "baseline": baseline,
        "time_grid": [2025, 2030],
    }


def brute_force_consistent(document):
    """Independent oracle: enumerate all state combinations and check the
    impact-balance maximum directly from the raw cell records."""
    from itertools import product

    ids = [d["id"] for d in document["descriptors"]]
    counts = [len(d["states"]) for d in document["descriptors"]]
    table = {}
    for rec in document["cim"]:
        key = (rec["source"], rec["source_state"], rec["target"], rec["target_state"])
        table[key] = float(rec["score"])
    consistent = []
    for combo in product(*(range(c) for c in counts)):
        ok = True
        for j, tgt in enumerate(ids):
            theta = []
            for l in range(counts[j]):
                total = 0.0
                for i, src in enumerate(ids):
                    if i == j:
                        continue
                    total += table[(src, combo[i], tgt, l)]
                theta.append(total)
            if theta[combo[j]] < max(theta):
                ok = False
                break
        if ok:
            consistent.append(combo)
    return consistent


def make_ensemble(pathway_states, periods=(2025, 2030, 2035), digest="test"):
    """Hand-built ensemble: pathway_states is a list of per-run state-vector
    sequences (one vector per period)."""
    runs = []
    for i, states in enumerate(pathway_states):
        pathway = Pathway(tuple((p, tuple(z)) for p, z in zip(periods, states)))
        runs.append(
            RunRecord(
                run_index=i,
                seed_stream=f"run/{i}",
                pathway=pathway,
                converged=(True,) * len(periods),
                succession_iterations=(0,) * len(periods),
            )
        )
    return EnsembleResult(digest, 0, len(runs), tuple(runs))
