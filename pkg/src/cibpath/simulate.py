"""Monte Carlo pathway simulation over the time grid.

Each run chains realised scenarios period by period: cyclic descriptors
transition stochastically and are locked, the cross-impact matrix is
sampled (and structurally shocked) per the configured policy, AR(1) score
perturbations are advanced once per period, and within-period succession
iterates to a fixed point. Run randomness comes solely from sub-streams
derived from (master seed, run index, period, purpose), so ensembles are
byte-identical for any worker count.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, TextIO

import numpy as np

from .engine import Scenario, check_consistency, succession_step
from .errors import ConfigError, InfeasibilityError, ParseError
from .model import CrossImpactMatrix, CyclicParams, StructuralShockConfig, StudySpec
from .uncertainty import (
    DynamicShockState,
    RandomSource,
    advance_dynamic_shock,
    apply_structural_shock,
    sample_cim,
)

DEFAULT_MAX_ITER = 100


@dataclass(frozen=True)
class Pathway:
    """Period-indexed sequence of realised scenarios."""

    entries: tuple[tuple[int, Scenario], ...]

    @property
    def periods(self) -> tuple[int, ...]:
        return tuple(p for p, _ in self.entries)

    @property
    def scenarios(self) -> tuple[Scenario, ...]:
        return tuple(z for _, z in self.entries)

    def terminal(self) -> Scenario:
        return self.entries[-1][1]

    def states_of(self, j: int) -> tuple[int, ...]:
        return tuple(z[j] for _, z in self.entries)


@dataclass(frozen=True)
class RunRecord:
    run_index: int
    seed_stream: str
    pathway: Pathway
    converged: tuple[bool, ...]
    succession_iterations: tuple[int, ...]
    error: Optional[str] = None


@dataclass(frozen=True)
class EnsembleResult:
    spec_digest: str
    master_seed: int
    run_count: int
    runs: tuple[RunRecord, ...]

    def ok_runs(self) -> tuple[RunRecord, ...]:
        return tuple(r for r in self.runs if r.error is None)


def transition_cyclic_state(
    params: CyclicParams, current: int, state_count: int, rng: np.random.Generator
) -> int:
    """Stochastic ordinal move: stay, one step, or two steps, direction up
    with probability (1 + drift) / 2. Moves blocked at the scale boundary
    stay put."""
    r = rng.random()
    if r < params.stay:
        return current
    steps = 1 if r < params.stay + params.step else 2
    up = rng.random() < (1.0 + params.drift) / 2.0
    target = current + (steps if up else -steps)
    if 0 <= target < state_count:
        return target
    return current


def simulate_period(
    spec: StudySpec,
    prev: Scenario,
    period: int,
    shock_state: DynamicShockState,
    source: RandomSource,
    run_index: int,
    max_iter: int = DEFAULT_MAX_ITER,
    run_cim: Optional[CrossImpactMatrix] = None,
) -> tuple[Scenario, DynamicShockState, bool, int]:
    """Evolve one period: cyclic transitions, period matrix, one AR(1) step,
    then within-period succession with cyclic descriptors locked.

    run_cim is the per-run sampled matrix under the per_run resample policy;
    when None the matrix is redrawn at this period's scale. Returns
    (realised scenario, new shock state, converged flag, iterations).
    """
    if max_iter < 1:
        raise ConfigError(f"max_iter must be >= 1 (got {max_iter})")

    if run_cim is not None:
        period_cim = run_cim
    else:
        period_cim = sample_cim(spec, source.substream(run_index, period, "cim"), period)
    if spec.shocks.structural.enabled:
        period_cim = apply_structural_shock(
            period_cim,
            source.substream(run_index, period, "structural"),
            spec.shocks.structural,
        )

    locked: set[str] = set()
    start = list(prev)
    cyclic_rng = source.substream(run_index, period, "cyclic")
    for j in spec.cyclic_indices:
        d = spec.descriptors[j]
        start[j] = transition_cyclic_state(
            d.cyclic_params, prev[j], d.state_count, cyclic_rng
        )
        locked.add(d.id)

    if spec.shocks.dynamic.enabled:
        shock_state = advance_dynamic_shock(
            shock_state, source.substream(run_index, period, "dynamic")
        )
        perturbation = shock_state.eta
    else:
        perturbation = None

    locked_frozen = frozenset(locked)
    current: Scenario = tuple(start)
    iterations = 0
    converged = False
    while iterations < max_iter:
        nxt = succession_step(spec, period_cim, current, locked_frozen, perturbation)
        if nxt == current:
            converged = True
            break
        current = nxt
        iterations += 1
    return current, shock_state, converged, iterations


def simulate_run(
    spec: StudySpec,
    run_index: int,
    source: RandomSource,
    max_iter: int = DEFAULT_MAX_ITER,
) -> RunRecord:
    """One full pathway: baseline verbatim at the first period, then chained
    per-period evolution. Infeasibility is recorded, not raised."""
    grid = spec.time_grid
    first = grid[0]
    run_cim = None
    if spec.uncertainty.resample == "per_run":
        run_cim = sample_cim(spec, source.substream(run_index, first, "cim"), first)

    entries: list[tuple[int, Scenario]] = [(first, spec.baseline)]
    converged: list[bool] = [True]
    iterations: list[int] = [0]
    shock_state = DynamicShockState.initial(spec)
    scenario: Scenario = spec.baseline
    error = None
    for period in grid[1:]:
        try:
            scenario, shock_state, conv, iters = simulate_period(
                spec, scenario, period, shock_state, source, run_index, max_iter, run_cim
            )
        except InfeasibilityError as e:
            error = str(e)
            break
        entries.append((period, scenario))
        converged.append(conv)
        iterations.append(iters)
    return RunRecord(
        run_index=run_index,
        seed_stream=f"run/{run_index}",
        pathway=Pathway(tuple(entries)),
        converged=tuple(converged),
        succession_iterations=tuple(iterations),
        error=error,
    )


def _run_range(args) -> list[RunRecord]:
    spec, start, stop, master_seed, max_iter = args
    source = RandomSource(master_seed)
    return [simulate_run(spec, i, source, max_iter) for i in range(start, stop)]


def simulate_ensemble(
    spec: StudySpec,
    run_count: int,
    master_seed: int,
    max_iter: int = DEFAULT_MAX_ITER,
    worker_count: int = 1,
) -> EnsembleResult:
    """Independent Monte Carlo runs, assembled in run-index order.

    Output is identical for any worker_count because each run's randomness
    is derived purely from (master_seed, run index, period, purpose).
    """
    if run_count < 1:
        raise ConfigError(f"run_count must be >= 1 (got {run_count})")
    if worker_count < 1:
        raise ConfigError(f"worker_count must be >= 1 (got {worker_count})")
    digest = spec.digest()
    if worker_count == 1 or run_count < 2 * worker_count:
        runs = _run_range((spec, 0, run_count, master_seed, max_iter))
    else:
        bounds = np.linspace(0, run_count, worker_count * 4 + 1, dtype=int)
        chunks = [
            (spec, int(a), int(b), master_seed, max_iter)
            for a, b in zip(bounds, bounds[1:])
            if b > a
        ]
        runs = []
        with ProcessPoolExecutor(max_workers=worker_count) as pool:
            for part in pool.map(_run_range, chunks):
                runs.extend(part)
    return EnsembleResult(digest, master_seed, run_count, tuple(runs))


def robustness_fraction(
    spec: StudySpec,
    scenario: Scenario,
    shock_config: StructuralShockConfig,
    sample_count: int,
    master_seed: int,
) -> float:
    """Fraction of structurally shocked matrices (drawn around the point
    estimates) under which the scenario stays consistent."""
    if sample_count < 1:
        raise ConfigError(f"sample_count must be >= 1 (got {sample_count})")
    source = RandomSource(master_seed)
    hits = 0
    for s in range(sample_count):
        shocked = apply_structural_shock(
            spec.cim, source.substream("robustness", s), shock_config
        )
        if check_consistency(spec, shocked, scenario).consistent:
            hits += 1
    return hits / sample_count


# ---------------------------------------------------------------------------
# Ensemble file format: one JSON header line, then one JSON record per run.


def write_ensemble(ensemble: EnsembleResult, fh: TextIO) -> None:
    header = {
        "spec_digest": ensemble.spec_digest,
        "master_seed": ensemble.master_seed,
        "run_count": ensemble.run_count,
    }
    fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n")
    for r in ensemble.runs:
        rec = {
            "run": r.run_index,
            "periods": list(r.pathway.periods),
            "states": [list(z) for z in r.pathway.scenarios],
            "converged": list(r.converged),
            "iterations": list(r.succession_iterations),
        }
        if r.error is not None:
            rec["error"] = r.error
        fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n")


def save_ensemble(ensemble: EnsembleResult, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        write_ensemble(ensemble, fh)


def load_ensemble(path: str) -> EnsembleResult:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln]
    if not lines:
        raise ParseError(path, "empty ensemble file")
    header = json.loads(lines[0])
    runs = []
    for ln in lines[1:]:
        rec = json.loads(ln)
        pathway = Pathway(
            tuple((p, tuple(z)) for p, z in zip(rec["periods"], rec["states"]))
        )
        runs.append(
            RunRecord(
                run_index=rec["run"],
                seed_stream=f"run/{rec['run']}",
                pathway=pathway,
                converged=tuple(rec["converged"]),
                succession_iterations=tuple(rec["iterations"]),
                error=rec.get("error"),
            )
        )
    return EnsembleResult(
        header["spec_digest"], header["master_seed"], header["run_count"], tuple(runs)
    )


def ensemble_digest(path: str) -> str:
    """Content hash of an ensemble file on disk."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()
