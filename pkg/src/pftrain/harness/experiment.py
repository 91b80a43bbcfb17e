"""Run a configured training experiment and collect per-step trajectories."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..henon import Dataset, HenonParams, Replay, attractor_points, generate_dataset, simulate_trained
from ..kalman import KalmanState, kf_run
from ..model import Array, EstimationError, MeasurementModel, TrainingExample
from ..networks import HENON_TRUE_WEIGHTS, MultiLayerPerceptron, henon_network
from ..particle_filter import DATASET_STREAM, pf_run, substream
from .config import ExperimentConfig

log = logging.getLogger(__name__)


@dataclass(eq=False)
class ExperimentReport:
    """Trajectory of one filter over the training examples.

    Row ``t`` of ``estimates`` is the weight estimate after example ``t``;
    ``residuals[t]`` is the one-step prediction error ``y(t) - yhat(t)``
    made before example ``t`` was absorbed. ``ess`` is NaN for the Kalman
    filter.
    """

    filter: str
    estimates: Array
    ess: Array
    residuals: Array
    final_dataset_mse: float
    wall_time_seconds: float
    final_std: Array
    true_weights: Array | None = None
    mse_trajectory: Array | None = None

    @property
    def num_steps(self) -> int:
        return self.estimates.shape[0]

    @property
    def final_estimate(self) -> Array:
        return self.estimates[-1]

    @property
    def final_error_per_weight(self) -> Array | None:
        if self.true_weights is None:
            return None
        return np.abs(self.true_weights - self.final_estimate)

    def per_step(self):
        for t in range(self.num_steps):
            yield {
                "step": t,
                "estimate": self.estimates[t],
                "ess": None if np.isnan(self.ess[t]) else float(self.ess[t]),
                "prediction_residual": float(self.residuals[t]),
            }


@dataclass(eq=False)
class ExperimentResult:
    config: ExperimentConfig
    examples: tuple[TrainingExample, ...]
    reports: dict[str, ExperimentReport]
    dataset: Dataset | None = None
    replay: Replay | None = None
    files: dict[str, Path] = field(default_factory=dict)

    @property
    def primary(self) -> ExperimentReport:
        return self.reports["pf"] if "pf" in self.reports else self.reports["kf"]


def dataset_mse(model: MeasurementModel, x, examples) -> float:
    x = np.asarray(x, dtype=float)
    preds = np.array([model.evaluate(x, ex.input) for ex in examples])
    outs = np.array([ex.output for ex in examples])
    return float(np.mean((outs - preds) ** 2))


def sine_examples(n: int, noise_std: float, rng: np.random.Generator) -> tuple[TrainingExample, ...]:
    """``y = sin(2 pi u) + noise`` for ``u`` uniform on [-1, 1]."""
    u = rng.uniform(-1.0, 1.0, n)
    y = np.sin(2.0 * np.pi * u) + noise_std * rng.standard_normal(n)
    return tuple(TrainingExample(np.array([ui]), yi) for ui, yi in zip(u, y))


def build_problem(cfg: ExperimentConfig):
    """Return ``(model, examples, dataset_or_None, true_weights_or_None)``."""
    rng = substream(cfg.seed, DATASET_STREAM)
    ds = cfg.dataset
    if cfg.problem == "henon_affine":
        data = generate_dataset(HenonParams(), ds.length + 2, ds.noise_std, ds.warmup, ds.init, rng)
        return henon_network(), data.examples, data, HENON_TRUE_WEIGHTS.copy()
    model = MultiLayerPerceptron(cfg.layer_sizes)
    return model, sine_examples(ds.length, ds.noise_std, rng), None, None


def _squared_errors(true_weights, estimates) -> Array | None:
    if true_weights is None:
        return None
    return np.array([EstimationError.between(true_weights, e).squared_norm for e in estimates])


def run_pf(cfg: ExperimentConfig, model, examples, true_weights=None) -> ExperimentReport:
    t0 = time.perf_counter()
    ens, outs = pf_run(model, examples, cfg.pf_config)
    elapsed = time.perf_counter() - t0
    estimates = np.array([o.estimate for o in outs])
    w = ens.normalized_weights
    centred = ens.particles - estimates[-1]
    return ExperimentReport(
        filter="pf",
        estimates=estimates,
        ess=np.array([o.ess for o in outs]),
        residuals=np.array([ex.output - o.predicted_output for ex, o in zip(examples, outs)]),
        final_dataset_mse=dataset_mse(model, estimates[-1], examples),
        wall_time_seconds=elapsed,
        final_std=np.sqrt(w @ centred**2),
        true_weights=true_weights,
        mse_trajectory=_squared_errors(true_weights, estimates),
    )


def run_kf(cfg: ExperimentConfig, model, examples, true_weights=None) -> ExperimentReport:
    prior_mean = np.broadcast_to(np.asarray(cfg.kf.prior_mean, dtype=float), (model.weight_dim,))
    init = KalmanState.isotropic(prior_mean, cfg.kf.prior_cov_scale)
    t0 = time.perf_counter()
    states = kf_run(model, examples, cfg.tunings, init)
    elapsed = time.perf_counter() - t0
    estimates = np.array([s.mean for s in states])
    prior_means = np.vstack([init.mean, estimates[:-1]])
    residuals = np.array(
        [ex.output - model.evaluate(m, ex.input) for ex, m in zip(examples, prior_means)]
    )
    return ExperimentReport(
        filter="kf",
        estimates=estimates,
        ess=np.full(len(states), np.nan),
        residuals=residuals,
        final_dataset_mse=dataset_mse(model, estimates[-1], examples),
        wall_time_seconds=elapsed,
        final_std=states[-1].std,
        true_weights=true_weights,
        mse_trajectory=_squared_errors(true_weights, estimates),
    )


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Generate data, run the selected filter(s) on it and optionally write outputs.

    Both filters see the identical example sequence. For the Henon problem the
    primary filter's final weights are replayed autonomously from the dataset's
    initial condition.
    """
    from .output import write_outputs

    model, examples, data, true_w = build_problem(cfg)
    log.info("%s: %d examples, filter=%s, seed=%d", cfg.problem, len(examples), cfg.filter, cfg.seed)
    reports: dict[str, ExperimentReport] = {}
    if cfg.filter in ("pf", "both"):
        reports["pf"] = run_pf(cfg, model, examples, true_w)
    if cfg.filter in ("kf", "both"):
        reports["kf"] = run_kf(cfg, model, examples, true_w)
    result = ExperimentResult(cfg, examples, reports, dataset=data)
    if cfg.problem == "henon_affine":
        result.replay = simulate_trained(result.primary.final_estimate, cfg.replay_steps, cfg.dataset.init)
        if result.replay.diverged:
            log.warning("replay of trained weights diverged at step %d", result.replay.diverged_at)
    for name, rep in reports.items():
        log.info("%s: final estimate %s, dataset MSE %.4g", name, np.round(rep.final_estimate, 4), rep.final_dataset_mse)
    if write:
        result.files = write_outputs(result, cfg.output_dir)
    return result


def replay_points(replay: Replay) -> list[tuple[float, float]]:
    states = replay.states[~np.isnan(replay.states)]
    return attractor_points(states)
