"""Bootstrap (SIR) particle filter over network weights.

Each step propagates every particle through the weight random walk, reweights
by the Gaussian measurement likelihood in the log domain, resamples
systematically when the effective sample size falls below a threshold, and
reports the weighted posterior mean. Only ``MeasurementModel.evaluate_batch``
is ever called on the network.

Randomness comes from numpy ``Generator`` objects (PCG64). :func:`substream`
derives an independent, reproducible generator for each role from one seed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .model import (
    Array,
    InvalidArgumentError,
    InvalidStateError,
    MeasurementModel,
    NoiseSpec,
    TrainingExample,
    as_vector,
)

log = logging.getLogger(__name__)

# Role identifiers for substream(); fixed so every randomness source is
# reproducible on its own.
DATASET_STREAM = 0
PRIOR_STREAM = 1
PROPAGATE_STREAM = 2
RESAMPLE_STREAM = 3


def substream(seed: int, role: int) -> np.random.Generator:
    """PCG64 generator for ``role`` derived from the experiment ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(role),))))


def _softmax(log_weights: Array) -> Array:
    w = np.exp(log_weights - np.max(log_weights))
    return w / w.sum()


@dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    """``N`` weighted weight vectors; row ``i`` of ``particles`` is particle ``i``."""

    particles: Array
    log_weights: Array
    normalized_weights: Array = field(init=False, repr=False)

    def __post_init__(self):
        particles = np.asarray(self.particles, dtype=float)
        lw = np.asarray(self.log_weights, dtype=float)
        if particles.ndim != 2 or particles.shape[0] < 1:
            raise InvalidArgumentError(f"particles must be an (N, d) array, got {particles.shape}")
        if lw.shape != (particles.shape[0],):
            raise InvalidArgumentError(
                f"log_weights shape {lw.shape} does not match {particles.shape[0]} particles"
            )
        if not np.all(np.isfinite(particles)):
            raise InvalidStateError("particles contain non-finite entries")
        if np.any(np.isnan(lw)) or not np.any(np.isfinite(lw)):
            raise InvalidStateError("log weights are not usable (NaN or all -inf)")
        object.__setattr__(self, "particles", particles)
        object.__setattr__(self, "log_weights", lw)
        object.__setattr__(self, "normalized_weights", _softmax(lw))

    @classmethod
    def uniform(cls, particles) -> "ParticleEnsemble":
        particles = np.asarray(particles, dtype=float)
        return cls(particles, np.zeros(particles.shape[0]))

    @property
    def num_particles(self) -> int:
        return self.particles.shape[0]

    @property
    def dim(self) -> int:
        return self.particles.shape[1]


@dataclass(frozen=True)
class PFConfig:
    """Particle-filter settings.

    Defaults: 1000 particles, N(0, I) prior, resampling when the effective
    sample size drops below half the particle count.
    """

    num_particles: int = 1000
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    prior_mean: Array | float = 0.0
    prior_cov_scale: float = 1.0
    ess_threshold_fraction: float = 0.5
    rng_seed: int = 0

    def __post_init__(self):
        if int(self.num_particles) != self.num_particles or self.num_particles < 1:
            raise InvalidArgumentError(f"num_particles must be a positive integer, got {self.num_particles}")
        if not (math.isfinite(self.prior_cov_scale) and self.prior_cov_scale > 0):
            raise InvalidArgumentError(f"prior_cov_scale must be > 0, got {self.prior_cov_scale}")
        if not (0.0 < self.ess_threshold_fraction <= 1.0):
            raise InvalidArgumentError(
                f"ess_threshold_fraction must lie in (0, 1], got {self.ess_threshold_fraction}"
            )
        if int(self.rng_seed) != self.rng_seed or self.rng_seed < 0:
            raise InvalidArgumentError(f"rng_seed must be a non-negative integer, got {self.rng_seed}")
        if not np.all(np.isfinite(np.asarray(self.prior_mean, dtype=float))):
            raise InvalidArgumentError("prior_mean must be finite")

    def prior_mean_vector(self, dim: int) -> Array:
        mean = np.asarray(self.prior_mean, dtype=float)
        if mean.ndim == 0:
            return np.full(dim, float(mean))
        return as_vector(mean, dim, "prior_mean")


@dataclass(frozen=True)
class PFStepOutput:
    estimate: Array
    ess: float
    resampled: bool
    predicted_output: float


def init_ensemble(cfg: PFConfig, dim: int, rng: np.random.Generator | None = None) -> ParticleEnsemble:
    """Draw ``cfg.num_particles`` i.i.d. particles from N(prior_mean, prior_cov_scale I).

    ``rng`` defaults to the prior substream of ``cfg.rng_seed``.
    """
    if rng is None:
        rng = substream(cfg.rng_seed, PRIOR_STREAM)
    mean = cfg.prior_mean_vector(dim)
    draws = rng.standard_normal((cfg.num_particles, dim))
    return ParticleEnsemble.uniform(mean + math.sqrt(cfg.prior_cov_scale) * draws)


def predict_step(ens: ParticleEnsemble, q: float, rng: np.random.Generator) -> ParticleEnsemble:
    """Random-walk prediction: every particle gets independent N(0, q I) noise.

    The whole noise block is drawn before any arithmetic so the result does
    not depend on how the per-particle work is split.
    """
    if not (math.isfinite(q) and q >= 0.0):
        raise InvalidArgumentError(f"q must be finite and >= 0, got {q}")
    draws = rng.standard_normal(ens.particles.shape)
    return ParticleEnsemble(ens.particles + math.sqrt(q) * draws, ens.log_weights)


def update_step(
    ens: ParticleEnsemble, model: MeasurementModel, ex: TrainingExample, r: float
) -> ParticleEnsemble:
    """Multiply in the Gaussian likelihood N(y; g(x_i, u), r).

    Constant terms are dropped and the log weights are re-shifted so their
    maximum is zero.
    """
    if not (math.isfinite(r) and r > 0.0):
        raise InvalidArgumentError(f"r must be finite and > 0, got {r}")
    if ens.dim != model.weight_dim:
        raise InvalidArgumentError(
            f"ensemble has dimension {ens.dim}, model expects {model.weight_dim}"
        )
    u = as_vector(ex.input, model.input_dim, "input")
    resid = ex.output - model.evaluate_batch(ens.particles, u)
    if np.any(np.isnan(resid)):
        raise InvalidStateError("measurement residual is NaN for at least one particle")
    lw = ens.log_weights - resid**2 / (2.0 * r)
    return ParticleEnsemble(ens.particles, lw - np.max(lw))


def effective_sample_size(ens: ParticleEnsemble) -> float:
    """``1 / sum(w**2)``, clipped to ``[1, N]``."""
    n = ens.num_particles
    if np.all(ens.log_weights == ens.log_weights[0]):
        return float(n)
    w = ens.normalized_weights
    return float(min(max(1.0 / np.dot(w, w), 1.0), n))


def systematic_indices(weights: Array, offset: float) -> Array:
    """Ancestor indices for systematic resampling.

    ``offset`` is the single uniform draw scaled to ``[0, 1)``; selection points
    are ``(offset + i) / N``. Work is done in units of ``1/N``: the number of
    points below a cumulative weight ``c`` is ``floor(c) + (offset < frac(c))``,
    which avoids forming ``offset + i`` in floating point. Cumulative sums that
    land within rounding of an integer are snapped to it, so weights that are
    exact multiples of ``1/N`` give exactly ``N * w_i`` copies.
    """
    w = np.asarray(weights, dtype=float)
    n = w.shape[0]
    if not 0.0 <= offset < 1.0:
        raise InvalidArgumentError(f"offset must lie in [0, 1), got {offset}")
    cum = np.cumsum(w) * n
    snapped = np.round(cum)
    cum = np.where(np.abs(cum - snapped) <= 1e-9 * n, snapped, cum)
    cum[-1] = n
    whole = np.floor(cum)
    below = np.minimum(whole + (offset < cum - whole), n).astype(np.int64)
    counts = np.diff(below, prepend=0)
    return np.repeat(np.arange(n), counts)


def systematic_resample(
    ens: ParticleEnsemble, rng: np.random.Generator, offset: float | None = None
) -> ParticleEnsemble:
    """Resample to uniform weights with one uniform offset.

    ``offset`` in ``[0, 1)`` overrides the draw from ``rng``; it is expressed
    in units of ``1/N``.
    """
    if offset is None:
        offset = float(rng.random())
    idx = systematic_indices(ens.normalized_weights, offset)
    return ParticleEnsemble.uniform(ens.particles[idx])


def posterior_mean(ens: ParticleEnsemble) -> Array:
    return ens.normalized_weights @ ens.particles


def pf_step(
    ens: ParticleEnsemble,
    model: MeasurementModel,
    ex: TrainingExample,
    cfg: PFConfig,
    rng: np.random.Generator,
    resample_rng: np.random.Generator | None = None,
) -> tuple[ParticleEnsemble, PFStepOutput]:
    """One predict / update / resample cycle.

    ``rng`` drives propagation and, unless ``resample_rng`` is given,
    resampling as well.
    """
    predicted = predict_step(ens, cfg.noise.q, rng)
    u = as_vector(ex.input, model.input_dim, "input")
    predicted_output = float(predicted.normalized_weights @ model.evaluate_batch(predicted.particles, u))
    updated = update_step(predicted, model, ex, cfg.noise.r)
    ess = effective_sample_size(updated)
    resampled = ess < cfg.ess_threshold_fraction * updated.num_particles
    if resampled:
        updated = systematic_resample(updated, resample_rng if resample_rng is not None else rng)
    out = PFStepOutput(
        estimate=posterior_mean(updated),
        ess=ess,
        resampled=bool(resampled),
        predicted_output=predicted_output,
    )
    return updated, out


def pf_run(
    model: MeasurementModel,
    data: Iterable[TrainingExample],
    cfg: PFConfig,
) -> tuple[ParticleEnsemble, list[PFStepOutput]]:
    """Filter a whole training sequence with substreams derived from ``cfg.rng_seed``."""
    ens = init_ensemble(cfg, model.weight_dim)
    prop_rng = substream(cfg.rng_seed, PROPAGATE_STREAM)
    res_rng = substream(cfg.rng_seed, RESAMPLE_STREAM)
    outputs: list[PFStepOutput] = []
    for ex in data:
        ens, out = pf_step(ens, model, ex, cfg, prop_rng, res_rng)
        outputs.append(out)
    n_res = sum(o.resampled for o in outputs)
    log.debug("particle filter: %d steps, %d resampling events", len(outputs), n_res)
    return ens, outputs


def ensemble_from_weights(particles: Sequence, weights: Sequence[float]) -> ParticleEnsemble:
    """Build an ensemble with the given normalized weights (zeros allowed)."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or w.sum() <= 0:
        raise InvalidArgumentError("weights must be non-negative with a positive sum")
    with np.errstate(divide="ignore"):
        lw = np.log(w)
    return ParticleEnsemble(np.asarray(particles, dtype=float), lw)
