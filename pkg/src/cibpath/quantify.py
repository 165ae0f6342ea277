"""Translation of a selected pathway into model-ready input tables.

State-to-value lookups per dimension (optionally time-dependent), panel
overrides with provenance, expert uncertainty ranges, terminal-period
extreme scenarios, and optional linear identity enforcement by
proportional rescaling of designated adjustable dimensions.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, replace
from typing import Optional

from .engine import Scenario
from .errors import ConfigError, CoverageError, EmptyInputError, OutOfRangeError, ParseError
from .model import StudySpec
from .simulate import EnsembleResult, Pathway

IDENTITY_TOL = 1e-9


@dataclass(frozen=True)
class Dimension:
    id: str
    unit: str
    driver: str  # descriptor id whose state drives the value


@dataclass(frozen=True)
class TranslationMatrix:
    """Per dimension, state index -> value; optionally per period."""

    #: (dimension id, ((state, value), ...)) for time-independent entries.
    entries: tuple[tuple[str, tuple[tuple[int, float], ...]], ...]
    #: (dimension id, ((state, ((period, value), ...)), ...)) overrides.
    timed_entries: tuple[tuple[str, tuple[tuple[int, tuple[tuple[int, float], ...]], ...]], ...] = ()

    def value(self, dimension: str, state: int, period: int) -> float:
        for did, states in self.timed_entries:
            if did == dimension:
                for s, by_period in states:
                    if s == state:
                        for p, v in by_period:
                            if p == period:
                                return v
        for did, states in self.entries:
            if did == dimension:
                for s, v in states:
                    if s == state:
                        return v
                break
        raise CoverageError(
            f"no translation entry for dimension {dimension!r}, state {state}"
        )


@dataclass(frozen=True)
class CellProvenance:
    origin: str  # "lookup" | "override" | "repair"
    state: Optional[int] = None
    note: str = ""


@dataclass(frozen=True)
class QuantifiedPathway:
    dimensions: tuple[Dimension, ...]
    periods: tuple[int, ...]
    values: tuple[tuple[str, int, float], ...]  # (dimension, period, value)
    ranges: tuple[tuple[str, int, float, float], ...] = ()
    provenance: tuple[tuple[str, int, CellProvenance], ...] = ()

    def value(self, dimension: str, period: int) -> float:
        for d, p, v in self.values:
            if d == dimension and p == period:
                return v
        raise KeyError((dimension, period))

    def range_of(self, dimension: str, period: int) -> Optional[tuple[float, float]]:
        for d, p, lo, hi in self.ranges:
            if d == dimension and p == period:
                return lo, hi
        return None

    def provenance_of(self, dimension: str, period: int) -> CellProvenance:
        for d, p, prov in self.provenance:
            if d == dimension and p == period:
                return prov
        raise KeyError((dimension, period))


@dataclass(frozen=True)
class ExtremeScenario:
    label: str
    axis: str  # "outcome_based" | "descriptor_based" | "frequency_based"
    period: int
    values: tuple[tuple[str, float], ...]  # complete over all dimensions


def quantify_pathway(
    pathway: Pathway,
    dimensions: tuple[Dimension, ...],
    matrix: TranslationMatrix,
    spec: StudySpec,
    overrides: tuple[tuple[str, int, float, str], ...] = (),
) -> QuantifiedPathway:
    """Pure lookup of each dimension's driver state per period; overrides
    replace looked-up values and are recorded in provenance."""
    known = {d.id for d in dimensions}
    over = {}
    for did, period, value, note in overrides:
        if did not in known:
            raise ConfigError(f"override references unknown dimension {did!r}")
        if period not in pathway.periods:
            raise ConfigError(f"override references unknown period {period}")
        over[(did, period)] = (value, note)
    values = []
    provenance = []
    for dim in dimensions:
        j = spec.index_of(dim.driver)
        for period, scenario in pathway.entries:
            state = scenario[j]
            if (dim.id, period) in over:
                v, note = over[(dim.id, period)]
                prov = CellProvenance("override", state, note)
            else:
                v = matrix.value(dim.id, state, period)
                prov = CellProvenance("lookup", state)
            values.append((dim.id, period, v))
            provenance.append((dim.id, period, prov))
    return QuantifiedPathway(
        dimensions, pathway.periods, tuple(values), (), tuple(provenance)
    )


def attach_uncertainty_ranges(qp: QuantifiedPathway, range_spec: dict) -> QuantifiedPathway:
    """Fill per-cell (low, high) bands from a per-dimension range spec.

    Per dimension either {"relative": f} (central * (1 -/+ f)),
    {"low_offset": a, "high_offset": b}, or absolute {"low": x, "high": y}.
    """
    ranges = []
    for d, p, central in qp.values:
        if d not in range_spec:
            continue
        rs = range_spec[d]
        if "relative" in rs:
            f = float(rs["relative"])
            lo, hi = central * (1 - f), central * (1 + f)
            if lo > hi:
                lo, hi = hi, lo
        elif "low_offset" in rs or "high_offset" in rs:
            lo = central + float(rs.get("low_offset", 0.0))
            hi = central + float(rs.get("high_offset", 0.0))
        else:
            lo, hi = float(rs["low"]), float(rs["high"])
        if lo > hi:
            raise OutOfRangeError(
                f"inverted range ({lo:g}, {hi:g}) for dimension {d!r} at period {p}"
            )
        if not lo <= central <= hi:
            raise OutOfRangeError(
                f"central value {central:g} outside range ({lo:g}, {hi:g}) "
                f"for dimension {d!r} at period {p}"
            )
        ranges.append((d, p, lo, hi))
    return replace(qp, ranges=tuple(ranges))


def _quantify_scenario(
    scenario: Scenario,
    period: int,
    dimensions: tuple[Dimension, ...],
    matrix: TranslationMatrix,
    spec: StudySpec,
) -> tuple[tuple[str, float], ...]:
    return tuple(
        (dim.id, matrix.value(dim.id, scenario[spec.index_of(dim.driver)], period))
        for dim in dimensions
    )


def build_extreme_scenarios(
    ensemble: EnsembleResult,
    dimensions: tuple[Dimension, ...],
    matrix: TranslationMatrix,
    spec: StudySpec,
    axes_config: dict,
) -> tuple[tuple[ExtremeScenario, ...], tuple[str, ...]]:
    """Terminal-period bounding cases along the configured axes.

    axes_config keys: "outcome" ({"descriptor": id}), "descriptor_stacks"
    ({label: {descriptor: state}}), "frequency" ({"min_count": n}).
    Returns (scenarios, warnings); an axis with no matching ensemble
    scenario is skipped with a warning.
    """
    runs = ensemble.ok_runs()
    if not runs:
        raise EmptyInputError("ensemble holds no successful runs")
    terminal_period = runs[0].pathway.periods[-1]
    terminal_counts = Counter(r.pathway.terminal() for r in runs)

    out: list[ExtremeScenario] = []
    warnings: list[str] = []

    if "outcome" in axes_config:
        did = axes_config["outcome"]["descriptor"]
        j = spec.index_of(did)
        n_states = spec.descriptors[j].state_count
        for state, side in ((0, "low"), (n_states - 1, "high")):
            matching = {t: c for t, c in terminal_counts.items() if t[j] == state}
            if not matching:
                warnings.append(
                    f"outcome axis: no terminal scenario with {did!r} in state {state}; skipped"
                )
                continue
            scenario = max(matching, key=lambda t: (matching[t], t))
            out.append(
                ExtremeScenario(
                    f"outcome-{side}",
                    "outcome_based",
                    terminal_period,
                    _quantify_scenario(scenario, terminal_period, dimensions, matrix, spec),
                )
            )

    for label, stack in (axes_config.get("descriptor_stacks") or {}).items():
        # Unstacked drivers take their modal terminal state in the ensemble.
        modal = max(terminal_counts, key=lambda t: (terminal_counts[t], t))
        scenario = list(modal)
        for did, state in stack.items():
            j = spec.index_of(did)
            d = spec.descriptors[j]
            if isinstance(state, str):
                state = d.state_labels().index(state)
            scenario[j] = state
        out.append(
            ExtremeScenario(
                f"stack-{label}",
                "descriptor_based",
                terminal_period,
                _quantify_scenario(tuple(scenario), terminal_period, dimensions, matrix, spec),
            )
        )

    if "frequency" in axes_config:
        min_count = int(axes_config["frequency"].get("min_count", 1))
        eligible = {t: c for t, c in terminal_counts.items() if c >= min_count}
        if not eligible:
            warnings.append(
                f"frequency axis: no terminal scenario reaches min_count {min_count}; skipped"
            )
        else:
            scenario = min(eligible, key=lambda t: (eligible[t], t))
            out.append(
                ExtremeScenario(
                    "tail-outcome",
                    "frequency_based",
                    terminal_period,
                    _quantify_scenario(scenario, terminal_period, dimensions, matrix, spec),
                )
            )

    if not 2 <= len(out) <= 4:
        warnings.append(
            f"{len(out)} extreme scenarios produced; 2 to 4 expected from the axes config"
        )
    return tuple(out), tuple(warnings)


@dataclass(frozen=True)
class Identity:
    """Linear relation sum(coeff_d * x_d) = rhs per period.

    rhs is a constant or the value of a designated total dimension.
    Only dimensions flagged adjustable may be rescaled during repair.
    """

    name: str
    terms: tuple[tuple[str, float], ...]  # (dimension, coefficient)
    adjustable: tuple[str, ...]
    rhs_value: Optional[float] = None
    rhs_dimension: Optional[str] = None


def enforce_identities(
    qp: QuantifiedPathway, identities: tuple[Identity, ...]
) -> QuantifiedPathway:
    """Repair violated identities per period by proportionally rescaling the
    adjustable dimensions onto the constraint; satisfied identities leave
    values untouched and repairs land in provenance."""
    values = {(d, p): v for d, p, v in qp.values}
    prov = {(d, p): pr for d, p, pr in qp.provenance}
    for ident in identities:
        if not ident.adjustable:
            raise ConfigError(f"identity {ident.name!r} has no adjustable dimension")
        term_dims = {d for d, _ in ident.terms}
        for d in ident.adjustable:
            if d not in term_dims:
                raise ConfigError(
                    f"identity {ident.name!r}: adjustable {d!r} is not a term"
                )
        for period in qp.periods:
            if ident.rhs_dimension is not None:
                rhs = values[(ident.rhs_dimension, period)]
            else:
                rhs = float(ident.rhs_value or 0.0)
            lhs = sum(c * values[(d, period)] for d, c in ident.terms)
            if abs(lhs - rhs) <= IDENTITY_TOL:
                continue
            fixed = sum(
                c * values[(d, period)]
                for d, c in ident.terms
                if d not in ident.adjustable
            )
            current = lhs - fixed
            target = rhs - fixed
            if current == 0.0:
                raise ConfigError(
                    f"identity {ident.name!r} unrepairable at period {period}: "
                    "adjustable contribution is zero"
                )
            scale = target / current
            for d in ident.adjustable:
                values[(d, period)] = values[(d, period)] * scale
                prov[(d, period)] = CellProvenance(
                    "repair",
                    prov[(d, period)].state,
                    f"identity {ident.name!r}: scaled by {scale:.6g}",
                )
    new_values = tuple((d, p, values[(d, p)]) for d, p, _ in qp.values)
    new_prov = tuple((d, p, prov[(d, p)]) for d, p, _ in qp.provenance)
    return replace(qp, values=new_values, provenance=new_prov)


# ---------------------------------------------------------------------------
# File formats


def parse_translation_file(doc: dict, spec: StudySpec) -> tuple[tuple[Dimension, ...], TranslationMatrix]:
    """Translation-matrix file: per-dimension driver, unit, and state->value
    table, with optional per-period columns."""
    dims = []
    entries = []
    timed = []
    for i, raw in enumerate(doc.get("dimensions", [])):
        path = f"dimensions[{i}]"
        try:
            dim = Dimension(raw["id"], raw.get("unit", ""), raw["driver"])
        except KeyError as e:
            raise ParseError(path, f"missing key {e}")
        driver = spec.descriptor(dim.driver)
        dims.append(dim)
        raw_vals = raw.get("values", {})
        plain = []
        by_period = []
        for state_ref, value in raw_vals.items():
            if state_ref in driver.state_labels():
                state = driver.state_labels().index(state_ref)
            else:
                try:
                    state = int(state_ref)
                except ValueError:
                    raise ParseError(
                        f"{path}.values", f"unknown state {state_ref!r} of {dim.driver!r}"
                    )
            if isinstance(value, dict):
                by_period.append(
                    (state, tuple((int(p), float(v)) for p, v in value.items()))
                )
            else:
                plain.append((state, float(value)))
        if plain:
            entries.append((dim.id, tuple(sorted(plain))))
        if by_period:
            timed.append((dim.id, tuple(sorted(by_period))))
    return tuple(dims), TranslationMatrix(tuple(entries), tuple(timed))


def load_translation_file(path: str, spec: StudySpec) -> tuple[tuple[Dimension, ...], TranslationMatrix]:
    with open(path, encoding="utf-8") as fh:
        return parse_translation_file(json.load(fh), spec)


def parse_identities(doc: dict) -> tuple[Identity, ...]:
    out = []
    for i, raw in enumerate(doc.get("identities", [])):
        path = f"identities[{i}]"
        try:
            out.append(
                Identity(
                    name=raw.get("name", f"identity-{i}"),
                    terms=tuple((d, float(c)) for d, c in raw["terms"].items()),
                    adjustable=tuple(raw["adjustable"]),
                    rhs_value=raw.get("equals"),
                    rhs_dimension=raw.get("equals_dimension"),
                )
            )
        except KeyError as e:
            raise ParseError(path, f"missing key {e}")
    return tuple(out)


def quantified_table_rows(qp: QuantifiedPathway) -> list[dict]:
    """Delimited-table form: one row per (dimension, period)."""
    rows = []
    units = {d.id: d.unit for d in qp.dimensions}
    for d, p, v in qp.values:
        r = qp.range_of(d, p)
        prov = qp.provenance_of(d, p)
        rows.append(
            {
                "dimension": d,
                "unit": units[d],
                "period": p,
                "central": v,
                "low": r[0] if r else "",
                "high": r[1] if r else "",
                "provenance": prov.origin if not prov.note else f"{prov.origin}:{prov.note}",
            }
        )
    return rows
