"""Exit criteria for the package, one test per criterion.

Run with ``pytest tests/test_acceptance.py``; a PASS/FAIL line per criterion
is printed in the terminal summary.
"""

import dataclasses
import math
import time

import numpy as np
import pytest

from pftrain.harness.config import defaults_for
from pftrain.harness.experiment import run_experiment
from pftrain.henon import HenonParams, generate_dataset, one_step_rmse, simulate_trained
from pftrain.model import PAPER_Q, PAPER_R, MeasurementModel, TrainingExample
from pftrain.networks import HENON_TRUE_WEIGHTS, henon_basis
from pftrain.particle_filter import (
    PFConfig,
    ParticleEnsemble,
    effective_sample_size,
    ensemble_from_weights,
    init_ensemble,
    posterior_mean,
    predict_step,
    systematic_indices,
    systematic_resample,
    update_step,
)

SEED = 2024


@pytest.fixture(scope="module")
def paper_run(tmp_path_factory):
    cfg = defaults_for("henon_affine").with_overrides(
        seed=SEED, filter="both", output_dir=tmp_path_factory.mktemp("paper_run")
    )
    assert cfg.tunings.q == PAPER_Q == 0.5 * math.sqrt(0.016)
    assert cfg.tunings.r == PAPER_R == 0.2
    assert cfg.dataset.noise_std == math.sqrt(0.2)
    assert cfg.dataset.length == 2000 and cfg.pf.num_particles == 1000
    t0 = time.perf_counter()
    result = run_experiment(cfg)
    return result, time.perf_counter() - t0


def test_1_kf_oracle_exactness(criterion):
    base = defaults_for("henon_affine")
    cfg = base.with_overrides(
        filter="kf",
        seed=SEED,
        dataset=dataclasses.replace(base.dataset, length=200, noise_std=0.0),
        tunings=dataclasses.replace(base.tunings, q=0.0),
        kf=dataclasses.replace(base.kf, prior_cov_scale=1e6),
    )
    t0 = time.perf_counter()
    result = run_experiment(cfg, write=False)
    elapsed = time.perf_counter() - t0
    final = result.reports["kf"].final_estimate

    rows = np.array([henon_basis(ex.input) for ex in result.examples])
    ys = np.array([ex.output for ex in result.examples])
    oracle = np.linalg.solve(np.eye(5) / 1e6 + rows.T @ rows / cfg.tunings.r, rows.T @ ys / cfg.tunings.r)

    abs_err = np.abs(final - HENON_TRUE_WEIGHTS).max()
    rel_err = np.linalg.norm(final - oracle) / np.linalg.norm(oracle)
    criterion(
        1,
        "KF oracle exactness",
        abs_err <= 1e-6 and rel_err <= 1e-8 and elapsed < 1.0,
        f"max|x-x*|={abs_err:.2e} (<=1e-6), rel vs closed form={rel_err:.2e} (<=1e-8), {elapsed:.3f}s (<1s)",
    )


def test_2_paper_experiment_reproduction(paper_run, criterion):
    result, elapsed = paper_run
    err = np.abs(result.reports["pf"].final_estimate - HENON_TRUE_WEIGHTS)
    kf_err = np.abs(result.reports["kf"].final_estimate - HENON_TRUE_WEIGHTS)
    criterion(
        2,
        "paper experiment reproduction",
        np.all(err <= 0.15) and elapsed < 30.0,
        f"PF |x-x*|={np.round(err, 3).tolist()} (<=0.15 each; KF on same data {np.round(kf_err, 3).tolist()}), {elapsed:.1f}s (<30s)",
    )


def test_3_pf_matches_kf(paper_run, criterion):
    result, _ = paper_run
    pf, kf = result.reports["pf"], result.reports["kf"]
    gap = np.abs(pf.estimates[-500:] - kf.estimates[-500:]).mean(axis=0)
    bound = 3.0 * kf.final_std
    ratio = pf.final_dataset_mse / kf.final_dataset_mse
    criterion(
        3,
        "PF ~ KF equivalence",
        np.all(gap <= bound) and ratio <= 1.2,
        f"mean|pf-kf| last 500={np.round(gap, 3).tolist()} vs 3*sd={np.round(bound, 3).tolist()}, MSE ratio={ratio:.3f} (<=1.2)",
    )


def test_4_attractor_replay(paper_run, criterion):
    result, _ = paper_run
    x_hat = result.reports["pf"].final_estimate
    replay = simulate_trained(x_hat, 5000, (0.1, 0.1))
    max_abs = float(np.nanmax(np.abs(replay.states)))
    fresh = generate_dataset(HenonParams(), 1002, 0.0, 5000, (0.1, 0.1), np.random.default_rng(0))
    rmse = one_step_rmse(x_hat, fresh.clean_states)
    criterion(
        4,
        "attractor replay",
        not replay.diverged and max_abs <= 2.0 and rmse <= 0.05,
        f"max|xi|={max_abs:.3f} (<=2), one-step RMSE={rmse:.4f} (<=0.05)",
    )


class _Identity(MeasurementModel):
    input_dim = 1

    def __init__(self, d):
        self.weight_dim = d

    def evaluate(self, x, u):
        return float(x[0])

    def evaluate_batch(self, xs, u):
        return xs[:, 0]


def test_5_particle_filter_properties(criterion):
    rng = np.random.default_rng(SEED)
    cases = 0
    failures = []
    for case in range(1200):
        n = int(rng.integers(1, 17))
        d = int(rng.integers(1, 4))
        particles = rng.normal(size=(n, d))
        lw = rng.normal(scale=5.0, size=n)
        ens = ParticleEnsemble(particles, lw)
        r = float(rng.uniform(0.05, 5.0))
        ex = TrainingExample(np.array([0.0]), float(rng.normal()))
        up = update_step(ens, _Identity(d), ex, r)
        w = up.normalized_weights
        ess = effective_sample_size(up)
        shifted = update_step(ParticleEnsemble(particles, lw + rng.normal(scale=100)), _Identity(d), ex, r)
        uniform = ParticleEnsemble.uniform(particles)
        degenerate = ensemble_from_weights(particles, np.eye(n)[rng.integers(n)])
        k = rng.multinomial(n, np.ones(n) / n)
        offset = float(rng.random()) if case % 10 else 0.0
        forced = np.bincount(systematic_indices(k / n, offset), minlength=n)
        resampled = systematic_resample(up, rng)
        x0 = rng.normal(size=d)
        same = ParticleEnsemble(np.tile(x0, (n, 1)), lw)
        checks = {
            "normalization": abs(w.sum() - 1.0) <= 1e-12 and np.all(w >= 0),
            "ess range": 1.0 <= ess <= n,
            "ess uniform": effective_sample_size(uniform) == n,
            "ess degenerate": effective_sample_size(degenerate) == 1.0,
            "forced counts": forced.tolist() == k.tolist(),
            "resample size": resampled.num_particles == n,
            "resample uniform": np.all(resampled.normalized_weights == 1.0 / n),
            "resample ess": effective_sample_size(resampled) == n,
            "mean fixed point": np.allclose(posterior_mean(same), x0, rtol=1e-13, atol=1e-15),
            "shift invariance": np.allclose(shifted.normalized_weights, w, rtol=1e-9, atol=1e-15),
        }
        failures += [(case, name) for name, ok in checks.items() if not ok]
        cases += 1
    criterion(
        5,
        "particle-filter property suite",
        cases >= 1000 and not failures,
        f"{cases} randomized cases (N<=16, d<=3), {len(failures)} violations {failures[:3]}",
    )


def test_6_monte_carlo_distributions(criterion):
    q = 0.01
    ens = ParticleEnsemble.uniform(np.zeros((100_000, 5)))
    moved = predict_step(ens, q, np.random.default_rng(SEED))
    var_rel = np.abs(moved.particles.var(axis=0) / q - 1).max()
    prior = init_ensemble(PFConfig(num_particles=100_000, rng_seed=SEED), 5)
    mean_abs = np.abs(prior.particles.mean(axis=0)).max()
    prior_var_rel = np.abs(prior.particles.var(axis=0) - 1).max()
    criterion(
        6,
        "Monte Carlo distribution checks",
        var_rel <= 0.05 and mean_abs <= 0.02 and prior_var_rel <= 0.05,
        f"predict var rel err={var_rel:.4f} (<=0.05), prior |mean|={mean_abs:.4f} (<=0.02), prior var rel err={prior_var_rel:.4f} (<=0.05)",
    )


def test_7_gradient_free_mlp_demo(tmp_path, criterion):
    cfg = defaults_for("mlp_demo").with_overrides(seed=SEED, output_dir=tmp_path)
    assert cfg.dataset.length == 500 and cfg.dataset.noise_std == 0.1 and cfg.pf.num_particles == 2000
    assert cfg.layer_sizes == (1, 8, 1)
    t0 = time.perf_counter()
    result = run_experiment(cfg)
    elapsed = time.perf_counter() - t0
    baseline = float(np.mean([ex.output**2 for ex in result.examples]))
    mse = result.reports["pf"].final_dataset_mse
    criterion(
        7,
        "gradient-free MLP demo",
        mse <= 0.5 * baseline and elapsed < 60.0,
        f"MSE={mse:.4f} vs 0.5*zero-predictor={0.5 * baseline:.4f}, {elapsed:.1f}s (<60s)",
    )


def test_8_determinism(paper_run, tmp_path, criterion):
    result, _ = paper_run
    again = run_experiment(result.config.with_overrides(output_dir=tmp_path))
    a = result.files["convergence"].read_bytes()
    b = again.files["convergence"].read_bytes()
    criterion(8, "determinism", a == b, f"convergence.csv {len(a)} bytes, identical={a == b}")
