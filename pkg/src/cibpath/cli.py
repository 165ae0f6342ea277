"""Command-line orchestration of the pathway pipeline.

Exit codes: 0 success, 1 validation error, 2 runtime/infeasibility,
3 configuration error. The default worker count can be set via the
CIBPATH_WORKERS environment variable.
"""

from __future__ import annotations

import json
import os
import sys

import click

from . import __version__
from .analytics import screen_candidates, select_candidates
from .engine import enumerate_consistent
from .errors import CibError, ConfigError, ParseError, TractabilityError, ValidationFailure
from .mcda import load_mcda_input, rank_pathways, ranking_report
from .model import load_study_spec, validate_study_spec
from .pipeline import (
    findings_report,
    load_candidate_pathways,
    load_pipeline_config,
    run_pipeline,
    screening_config_from,
    write_candidate_report,
    write_quantified_outputs,
    write_share_tables,
)
from .quantify import (
    attach_uncertainty_ranges,
    build_extreme_scenarios,
    enforce_identities,
    load_translation_file,
    parse_identities,
    quantify_pathway,
)
from .simulate import (
    DEFAULT_MAX_ITER,
    load_ensemble,
    save_ensemble,
    simulate_ensemble,
)

EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_CONFIG = 3


def _default_workers() -> int:
    return int(os.environ.get("CIBPATH_WORKERS", "1"))


def _fail(code: int, error: Exception) -> None:
    report = {"error": type(error).__name__, "message": str(error)}
    click.echo(json.dumps(report), err=True)
    sys.exit(code)


def _guarded(fn):
    def wrapper(*args, **kwargs):
        try:
            fn(*args, **kwargs)
        except ValidationFailure as e:
            _fail(EXIT_VALIDATION, e)
        except (ConfigError, ParseError, TractabilityError) as e:
            _fail(EXIT_CONFIG, e)
        except CibError as e:
            _fail(EXIT_RUNTIME, e)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


spec_option = click.option(
    "--spec", "spec_path", required=True, type=click.Path(exists=True), help="Study-spec file."
)
out_option = click.option("--out", "out_dir", default="out", help="Output directory.")
seed_option = click.option("--seed", "master_seed", default=0, type=int, help="Master seed.")
level_option = click.option(
    "--level", default=0.95, type=float, help="Interval confidence level."
)


@click.group()
@click.version_option(__version__)
def main():
    """Probabilistic cross-impact balance pathway engine."""


@main.command()
@spec_option
@_guarded
def validate(spec_path):
    """Check a study spec; exit 1 when errors are found."""
    spec = load_study_spec(spec_path)
    findings = validate_study_spec(spec)
    report = findings_report(findings)
    click.echo(json.dumps(report, indent=2, sort_keys=True))
    if report["errors"]:
        raise ValidationFailure(f"{len(report['errors'])} validation errors")


@main.command()
@spec_option
@click.option("--limit", default=100_000, type=int, help="State-space tractability bound.")
@_guarded
def enumerate(spec_path, limit):
    """Exhaustively list all consistent, feasible scenarios (small spaces)."""
    spec = load_study_spec(spec_path)
    scenarios = enumerate_consistent(spec, spec.cim, limit)
    doc = {
        "descriptors": [d.id for d in spec.descriptors],
        "consistent_scenarios": [list(z) for z in scenarios],
        "count": len(scenarios),
    }
    click.echo(json.dumps(doc, indent=2))


@main.command()
@spec_option
@out_option
@seed_option
@click.option("--runs", default=10_000, type=int, help="Monte Carlo run count.")
@click.option("--workers", default=None, type=int, help="Worker process count.")
@click.option("--max-iter", default=DEFAULT_MAX_ITER, type=int, help="Succession iteration cap.")
@_guarded
def simulate(spec_path, out_dir, master_seed, runs, workers, max_iter):
    """Simulate the pathway ensemble and write ensemble.jsonl."""
    spec = load_study_spec(spec_path)
    findings = validate_study_spec(spec)
    if any(f.severity == "error" for f in findings):
        raise ValidationFailure("study spec failed validation; run `cibpath validate`")
    ensemble = simulate_ensemble(
        spec, runs, master_seed, max_iter, workers or _default_workers()
    )
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "ensemble.jsonl")
    save_ensemble(ensemble, path)
    click.echo(path)


@main.command()
@spec_option
@out_option
@level_option
@click.option("--ensemble", "ensemble_path", required=True, type=click.Path(exists=True))
@_guarded
def stats(spec_path, out_dir, level, ensemble_path):
    """Emit per-state ensemble share series with Wilson bands."""
    spec = load_study_spec(spec_path)
    ensemble = load_ensemble(ensemble_path)
    os.makedirs(out_dir, exist_ok=True)
    for path in write_share_tables(ensemble, spec, level, out_dir):
        click.echo(path)


@main.command()
@spec_option
@out_option
@click.option("--ensemble", "ensemble_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="Screening config JSON (outcome_descriptor, thresholds, ...).")
@click.option("-k", "--candidates", "k", default=4, type=int, help="Candidate count.")
@_guarded
def screen(spec_path, out_dir, ensemble_path, config_path, k):
    """Screen pathways for plausibility and select the candidate set."""
    spec = load_study_spec(spec_path)
    ensemble = load_ensemble(ensemble_path)
    with open(config_path, encoding="utf-8") as fh:
        doc = json.load(fh)
    scfg = screening_config_from(doc)
    best_state = doc.get("best_outcome_state")
    if best_state is None:
        best_state = spec.descriptor(scfg.outcome_descriptor).state_count - 1
    screened = screen_candidates(ensemble, spec, scfg)
    selected = select_candidates(
        screened, k, (scfg.outcome_descriptor, int(best_state)), spec
    )
    os.makedirs(out_dir, exist_ok=True)
    click.echo(write_candidate_report(selected, out_dir))


@main.command()
@out_option
@click.option("--input", "input_path", required=True, type=click.Path(exists=True),
              help="MCDA input file (criteria, persona weights, score matrix).")
@_guarded
def mcda(out_dir, input_path):
    """Rank pathways by persona-weighted additive scores."""
    inp = load_mcda_input(input_path)
    ranking = rank_pathways(inp)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "mcda_report.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(ranking_report(inp, ranking), fh, indent=2, sort_keys=True)
        fh.write("\n")
    click.echo(path)


@main.command()
@spec_option
@out_option
@click.option("--candidates", "candidates_path", required=True, type=click.Path(exists=True))
@click.option("--pathway", "pathway_id", required=True, help="Candidate pathway id.")
@click.option("--matrix", "matrix_path", required=True, type=click.Path(exists=True),
              help="Translation-matrix file.")
@click.option("--ranges", "ranges_path", default=None, type=click.Path(exists=True))
@click.option("--identities", "identities_path", default=None, type=click.Path(exists=True))
@click.option("--ensemble", "ensemble_path", default=None, type=click.Path(exists=True),
              help="Needed for extreme scenarios.")
@click.option("--extremes", "extremes_path", default=None, type=click.Path(exists=True),
              help="Extreme-scenario axes config JSON.")
@_guarded
def quantify(spec_path, out_dir, candidates_path, pathway_id, matrix_path,
             ranges_path, identities_path, ensemble_path, extremes_path):
    """Translate a selected pathway into a model-ready input table."""
    spec = load_study_spec(spec_path)
    pathways = load_candidate_pathways(candidates_path)
    if pathway_id not in pathways:
        raise ConfigError(f"pathway {pathway_id!r} not in {candidates_path}")
    dims, matrix = load_translation_file(matrix_path, spec)
    qp = quantify_pathway(pathways[pathway_id], dims, matrix, spec)
    if ranges_path:
        with open(ranges_path, encoding="utf-8") as fh:
            qp = attach_uncertainty_ranges(qp, json.load(fh))
    if identities_path:
        with open(identities_path, encoding="utf-8") as fh:
            qp = enforce_identities(qp, parse_identities(json.load(fh)))
    extremes, warnings = (), ()
    if extremes_path:
        if not ensemble_path:
            raise ConfigError("--extremes requires --ensemble")
        with open(extremes_path, encoding="utf-8") as fh:
            extremes, warnings = build_extreme_scenarios(
                load_ensemble(ensemble_path), dims, matrix, spec, json.load(fh)
            )
    os.makedirs(out_dir, exist_ok=True)
    for path in write_quantified_outputs(qp, extremes, warnings, pathway_id, out_dir):
        click.echo(path)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="Pipeline config JSON.")
@click.option("--out", "out_dir", default=None, help="Override the output directory.")
@click.option("--workers", default=None, type=int)
@click.option("--runs", default=None, type=int)
@click.option("--seed", default=None, type=int)
@_guarded
def pipeline(config_path, out_dir, workers, runs, seed):
    """Run all enabled stages end to end and write the manifest."""
    cfg = load_pipeline_config(config_path, out_dir)
    if workers is not None:
        cfg.worker_count = workers
    elif "CIBPATH_WORKERS" in os.environ:
        cfg.worker_count = _default_workers()
    if runs is not None:
        cfg.run_count = runs
    if seed is not None:
        cfg.master_seed = seed
    manifest = run_pipeline(cfg)
    click.echo(json.dumps(manifest, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
