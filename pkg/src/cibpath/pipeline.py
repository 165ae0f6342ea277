"""File-based pipeline stages and the manifest.

Each stage reads only the declared artifacts of prior stages and writes
plain JSON / delimited-text files, so every inter-stage handoff can be
audited and re-running any stage with identical inputs and seed
reproduces byte-identical artifacts.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass
from typing import Optional

from . import __version__
from .analytics import (
    CandidateSet,
    ScreeningConfig,
    screen_candidates,
    select_candidates,
    state_share_series,
)
from .errors import ConfigError, ValidationFailure
from .mcda import load_mcda_input, rank_pathways, ranking_report
from .model import Finding, StudySpec, load_study_spec, validate_study_spec
from .quantify import (
    attach_uncertainty_ranges,
    build_extreme_scenarios,
    enforce_identities,
    load_translation_file,
    parse_identities,
    quantified_table_rows,
    quantify_pathway,
)
from .simulate import (
    DEFAULT_MAX_ITER,
    EnsembleResult,
    Pathway,
    load_ensemble,
    save_ensemble,
    simulate_ensemble,
)

ALL_STAGES = ("validate", "simulate", "stats", "screen", "mcda", "quantify")


@dataclass
class PipelineConfig:
    spec_path: str
    output_dir: str
    run_count: int = 10_000
    master_seed: int = 0
    worker_count: int = 1
    max_iter: int = DEFAULT_MAX_ITER
    confidence_level: float = 0.95
    stages: tuple[str, ...] = ALL_STAGES
    screening: Optional[dict] = None
    candidate_count: int = 4
    mcda_input_path: Optional[str] = None
    translation_path: Optional[str] = None
    identities_path: Optional[str] = None
    ranges: Optional[dict] = None
    extremes: Optional[dict] = None
    selected_pathway: Optional[str] = None


def load_pipeline_config(path: str, output_dir: Optional[str] = None) -> PipelineConfig:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p: Optional[str]) -> Optional[str]:
        if p is None:
            return None
        return p if os.path.isabs(p) else os.path.join(base, p)

    try:
        cfg = PipelineConfig(
            spec_path=resolve(doc["spec"]),
            output_dir=output_dir or resolve(doc.get("output_dir", "out")),
            run_count=int(doc.get("run_count", 10_000)),
            master_seed=int(doc.get("master_seed", 0)),
            worker_count=int(doc.get("worker_count", 1)),
            max_iter=int(doc.get("max_iter", DEFAULT_MAX_ITER)),
            confidence_level=float(doc.get("confidence_level", 0.95)),
            stages=tuple(doc.get("stages", ALL_STAGES)),
            screening=doc.get("screening"),
            candidate_count=int(doc.get("candidate_count", 4)),
            mcda_input_path=resolve(doc.get("mcda_input")),
            translation_path=resolve(doc.get("translation")),
            identities_path=resolve(doc.get("identities")),
            ranges=doc.get("ranges"),
            extremes=doc.get("extremes"),
            selected_pathway=doc.get("selected_pathway"),
        )
    except KeyError as e:
        raise ConfigError(f"pipeline config missing key {e}")
    for stage in cfg.stages:
        if stage not in ALL_STAGES:
            raise ConfigError(f"unknown stage {stage!r}")
    if cfg.run_count < 1:
        raise ConfigError("run_count must be >= 1")
    return cfg


def _dump_json(doc, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def findings_report(findings: list[Finding]) -> dict:
    return {
        "errors": [
            {"path": f.path, "message": f.message}
            for f in findings
            if f.severity == "error"
        ],
        "warnings": [
            {"path": f.path, "message": f.message}
            for f in findings
            if f.severity == "warning"
        ],
    }


def write_share_tables(
    ensemble: EnsembleResult, spec: StudySpec, level: float, out_dir: str
) -> list[str]:
    """Plot-ready share series: one row per descriptor/period/state."""
    rows = []
    series_doc = {}
    for d in spec.descriptors:
        series = state_share_series(ensemble, spec, d.id, level)
        per_desc = []
        for period, cells in series.cells:
            for state, cell in enumerate(cells):
                rows.append(
                    {
                        "descriptor": d.id,
                        "period": period,
                        "state": state,
                        "label": d.states[state].label,
                        "share": cell.share,
                        "low": cell.low,
                        "high": cell.high,
                    }
                )
                per_desc.append(
                    {
                        "period": period,
                        "state": state,
                        "share": cell.share,
                        "low": cell.low,
                        "high": cell.high,
                    }
                )
        series_doc[d.id] = per_desc
    csv_path = os.path.join(out_dir, "shares.csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["descriptor", "period", "state", "label", "share", "low", "high"]
        )
        writer.writeheader()
        writer.writerows(rows)
    json_path = os.path.join(out_dir, "shares.json")
    _dump_json({"confidence_level": level, "series": series_doc}, json_path)
    return [csv_path, json_path]


def _pathway_doc(pathway: Pathway) -> dict:
    return {
        "periods": list(pathway.periods),
        "states": [list(z) for z in pathway.scenarios],
    }


def write_candidate_report(selected: CandidateSet, out_dir: str) -> str:
    doc = {
        "candidates": [
            {
                "id": f"C{i + 1}",
                "rationale": c.rationale,
                "terminal_frequency": c.terminal_frequency,
                **_pathway_doc(c.pathway),
            }
            for i, c in enumerate(selected.candidates)
        ],
        "rejected": [
            {**_pathway_doc(p), "reason": reason} for p, reason in selected.rejected
        ],
        "warnings": list(selected.warnings),
    }
    path = os.path.join(out_dir, "candidates.json")
    _dump_json(doc, path)
    return path


def load_candidate_pathways(path: str) -> dict[str, Pathway]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return {
        c["id"]: Pathway(
            tuple((p, tuple(z)) for p, z in zip(c["periods"], c["states"]))
        )
        for c in doc["candidates"]
    }


def screening_config_from(doc: dict) -> ScreeningConfig:
    try:
        outcome = doc["outcome_descriptor"]
    except KeyError:
        raise ConfigError("screening config needs 'outcome_descriptor'")
    return ScreeningConfig(
        outcome_descriptor=outcome,
        late_rush_steps=int(doc.get("late_rush_steps", 2)),
        discontinuity_steps=int(doc.get("discontinuity_steps", 2)),
        full_vector_backsliding=bool(doc.get("full_vector_backsliding", False)),
        endpoint_exclusions=tuple(
            tuple((d, s) for d, s in combo)
            for combo in doc.get("endpoint_exclusions", [])
        ),
    )


def run_pipeline(config: PipelineConfig) -> dict:
    """Execute the enabled stages in order; returns the manifest document.

    Stage failures raise; validation errors raise ConfigError after the
    findings report has been written.
    """
    os.makedirs(config.output_dir, exist_ok=True)
    spec = load_study_spec(config.spec_path)
    manifest: dict = {
        "spec_digest": spec.digest(),
        "master_seed": config.master_seed,
        "run_count": config.run_count,
        "version": __version__,
        "stages": {},
    }

    def record(stage: str, paths: list[str]) -> None:
        manifest["stages"][stage] = {
            os.path.basename(p): _file_digest(p) for p in paths
        }

    if "validate" in config.stages:
        findings = validate_study_spec(spec)
        report_path = os.path.join(config.output_dir, "findings.json")
        _dump_json(findings_report(findings), report_path)
        record("validate", [report_path])
        if any(f.severity == "error" for f in findings):
            raise ValidationFailure(
                f"study spec failed validation; see {report_path}"
            )

    ensemble: Optional[EnsembleResult] = None
    ensemble_path = os.path.join(config.output_dir, "ensemble.jsonl")
    if "simulate" in config.stages:
        ensemble = simulate_ensemble(
            spec,
            config.run_count,
            config.master_seed,
            config.max_iter,
            config.worker_count,
        )
        save_ensemble(ensemble, ensemble_path)
        record("simulate", [ensemble_path])

    def need_ensemble() -> EnsembleResult:
        nonlocal ensemble
        if ensemble is None:
            ensemble = load_ensemble(ensemble_path)
        return ensemble

    if "stats" in config.stages:
        paths = write_share_tables(
            need_ensemble(), spec, config.confidence_level, config.output_dir
        )
        record("stats", paths)

    selected_set: Optional[CandidateSet] = None
    candidates_path = os.path.join(config.output_dir, "candidates.json")
    if "screen" in config.stages:
        if not config.screening:
            raise ConfigError("screen stage enabled but no screening config given")
        scfg = screening_config_from(config.screening)
        screened = screen_candidates(need_ensemble(), spec, scfg)
        best_state = config.screening.get("best_outcome_state")
        if best_state is None:
            best_state = spec.descriptor(scfg.outcome_descriptor).state_count - 1
        selected_set = select_candidates(
            screened,
            config.candidate_count,
            (scfg.outcome_descriptor, int(best_state)),
            spec,
        )
        record("screen", [write_candidate_report(selected_set, config.output_dir)])

    ranking_path = os.path.join(config.output_dir, "mcda_report.json")
    selected_id: Optional[str] = config.selected_pathway
    if "mcda" in config.stages:
        if not config.mcda_input_path:
            raise ConfigError("mcda stage enabled but no mcda_input path given")
        inp = load_mcda_input(config.mcda_input_path)
        ranking = rank_pathways(inp)
        _dump_json(ranking_report(inp, ranking), ranking_path)
        record("mcda", [ranking_path])
        if selected_id is None:
            selected_id = ranking.order[0]

    if "quantify" in config.stages:
        if not config.translation_path:
            raise ConfigError("quantify stage enabled but no translation path given")
        if selected_id is None:
            raise ConfigError(
                "quantify stage needs a selected pathway (mcda stage or explicit override)"
            )
        pathways = load_candidate_pathways(candidates_path)
        if selected_id not in pathways:
            raise ConfigError(f"selected pathway {selected_id!r} not in candidates")
        dims, matrix = load_translation_file(config.translation_path, spec)
        qp = quantify_pathway(pathways[selected_id], dims, matrix, spec)
        if config.ranges:
            qp = attach_uncertainty_ranges(qp, config.ranges)
        if config.identities_path:
            with open(config.identities_path, encoding="utf-8") as fh:
                identities = parse_identities(json.load(fh))
            qp = enforce_identities(qp, identities)
        extremes, warnings = (), ()
        if config.extremes:
            extremes, warnings = build_extreme_scenarios(
                need_ensemble(), dims, matrix, spec, config.extremes
            )
        paths = write_quantified_outputs(
            qp, extremes, warnings, selected_id, config.output_dir
        )
        record("quantify", paths)

    manifest_path = os.path.join(config.output_dir, "manifest.json")
    _dump_json(manifest, manifest_path)
    return manifest


def write_quantified_outputs(qp, extremes, warnings, selected_id: str, out_dir: str) -> list[str]:
    rows = quantified_table_rows(qp)
    csv_path = os.path.join(out_dir, "quantified.csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh,
            fieldnames=["dimension", "unit", "period", "central", "low", "high", "provenance"],
        )
        writer.writeheader()
        writer.writerows(rows)
    bundle = {
        "selected_pathway": selected_id,
        "dimensions": [
            {"id": d.id, "unit": d.unit, "driver": d.driver} for d in qp.dimensions
        ],
        "table": rows,
        "extreme_scenarios": [
            {
                "label": e.label,
                "axis": e.axis,
                "period": e.period,
                "values": {d: v for d, v in e.values},
            }
            for e in extremes
        ],
        "warnings": list(warnings),
    }
    json_path = os.path.join(out_dir, "quantified.json")
    _dump_json(bundle, json_path)
    return [csv_path, json_path]
