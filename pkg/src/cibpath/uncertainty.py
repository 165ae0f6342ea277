"""Stochastic machinery: seedable sub-streams, confidence-coded CIM
sampling, structural shocks, and the AR(1) dynamic-shock process.

Every draw sequence is derived from (master_seed, stream parts), so results
are byte-identical regardless of worker count or evaluation order.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, OutOfRangeError
from .model import (
    SCORE_MAX,
    SCORE_MIN,
    CrossImpactMatrix,
    Distribution,
    DynamicShockConfig,
    StructuralShockConfig,
    StudySpec,
    UncertaintyConfig,
)

_SEED_MASK = (1 << 64) - 1


def _encode_part(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    if isinstance(part, (int, np.integer)):
        return int(part) & _SEED_MASK
    raise TypeError(f"stream part must be int or str, got {type(part)!r}")


@dataclass(frozen=True)
class RandomSource:
    """Root of all randomness for one batch.

    Identical (master_seed, stream parts) always yield an identical draw
    sequence; independent parts yield statistically independent streams.
    """

    master_seed: int

    def substream(self, *parts) -> np.random.Generator:
        entropy = [self.master_seed & _SEED_MASK] + [_encode_part(p) for p in parts]
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def draw_scaled(
    rng: np.random.Generator, distribution: Distribution, sd: float, shape
) -> np.ndarray:
    """Zero-mean draws whose standard deviation equals sd.

    Student-t draws are rescaled by sqrt((df-2)/df) so the requested sd is
    the distribution's actual standard deviation; df > 2 is required.
    """
    if distribution.kind == "gaussian":
        return rng.standard_normal(shape) * sd
    df = distribution.df or 0
    if df <= 2:
        raise ConfigError(
            f"student_t innovations need df > 2 for a finite variance (got df={df})"
        )
    return rng.standard_t(df, shape) * (sd * math.sqrt((df - 2) / df))


def judgement_sigma(
    uncertainty: UncertaintyConfig, confidence: int, period: int
) -> float:
    """Per-cell sampling scale: confidence sigma times the period factor."""
    if not 1 <= confidence <= 5:
        raise OutOfRangeError(f"confidence code {confidence} outside 1..5")
    try:
        factor = uncertainty.factor(period)
    except KeyError:
        raise OutOfRangeError(f"period {period} not in the time grid")
    return uncertainty.sigma(confidence) * factor


def sample_cim(
    spec: StudySpec, rng: np.random.Generator, period: int
) -> CrossImpactMatrix:
    """Sample every cell around its point estimate with its confidence-derived
    scale, clipped to the elicitation range; confidences pass through."""
    unc = spec.uncertainty
    try:
        factor = unc.factor(period)
    except KeyError:
        raise OutOfRangeError(f"period {period} not in the time grid")
    cim = spec.cim
    sigma_by_code = np.array((0.0,) + unc.confidence_sigma)
    sigma = sigma_by_code[np.where(cim.valid_mask, cim.confidences, 0)] * factor
    noise = draw_scaled(rng, unc.sampling_distribution, 1.0, cim.scores.shape) * sigma
    scores = np.clip(cim.scores + noise, SCORE_MIN, SCORE_MAX)
    scores[~cim.valid_mask] = 0.0
    return cim.with_scores(scores)


def apply_structural_shock(
    cim: CrossImpactMatrix, rng: np.random.Generator, config: StructuralShockConfig
) -> CrossImpactMatrix:
    """Add an independent perturbation of the configured scale to every cell,
    clipping the result back to the elicitation range."""
    noise = draw_scaled(rng, config.distribution, config.scale, cim.scores.shape)
    scores = np.clip(cim.scores + noise, SCORE_MIN, SCORE_MAX)
    scores[~cim.valid_mask] = 0.0
    return cim.with_scores(scores)


@dataclass(frozen=True)
class DynamicShockState:
    """AR(1) score perturbations eta per (descriptor, state)."""

    eta: np.ndarray  # shape (D, S_max)
    persistence: float
    long_run_sd: float
    distribution: Distribution

    @classmethod
    def initial(cls, spec: StudySpec) -> "DynamicShockState":
        cfg: DynamicShockConfig = spec.shocks.dynamic
        shape = (len(spec.descriptors), max(spec.state_counts))
        return cls(np.zeros(shape), cfg.persistence, cfg.long_run_sd, cfg.distribution)


def advance_dynamic_shock(
    state: DynamicShockState, rng: np.random.Generator
) -> DynamicShockState:
    """One AR(1) step: eta <- rho * eta + u, with innovation sd
    tau * sqrt(1 - rho^2) so the long-run sd of eta is tau."""
    rho, tau = state.persistence, state.long_run_sd
    if not abs(rho) < 1:
        raise ConfigError(f"|rho| = {abs(rho):g} must be < 1 for stationarity")
    innovation_sd = tau * math.sqrt(1.0 - rho * rho)
    u = draw_scaled(rng, state.distribution, innovation_sd, state.eta.shape)
    return DynamicShockState(
        rho * state.eta + u, rho, tau, state.distribution
    )
