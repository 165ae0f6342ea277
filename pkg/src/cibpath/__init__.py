"""Probabilistic cross-impact balance pathway engine.

Consumes a workshop-produced study spec (descriptors, states, cross-impact
judgements, rules, shock configuration) and produces consistent multi-period
pathway ensembles, a documented MCDA pathway selection, and quantified
model-ready input tables.
"""

__version__ = "0.1.0"

from .engine import (
    Attractor,
    NonConvergence,
    Scenario,
    check_consistency,
    enumerate_consistent,
    find_attractor,
    impact_balance,
    succession_step,
)
from .model import (
    CrossImpactMatrix,
    Descriptor,
    StudySpec,
    load_study_spec,
    parse_study_spec,
    save_study_spec,
    serialize_study_spec,
    validate_study_spec,
)
from .simulate import (
    EnsembleResult,
    Pathway,
    RunRecord,
    robustness_fraction,
    simulate_ensemble,
)
from .uncertainty import RandomSource

__all__ = [
    "Attractor",
    "CrossImpactMatrix",
    "Descriptor",
    "EnsembleResult",
    "NonConvergence",
    "Pathway",
    "RandomSource",
    "RunRecord",
    "Scenario",
    "StudySpec",
    "check_consistency",
    "enumerate_consistent",
    "find_attractor",
    "impact_balance",
    "load_study_spec",
    "parse_study_spec",
    "robustness_fraction",
    "save_study_spec",
    "serialize_study_spec",
    "simulate_ensemble",
    "succession_step",
    "validate_study_spec",
]
