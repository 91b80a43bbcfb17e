"""Command-line entry point: ``pftrain train`` and ``pftrain replay``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .harness.config import ExperimentConfig, defaults_for, load_config
from .harness.experiment import replay_points, run_experiment
from .harness.output import write_attractor_svg, write_weights_csv, read_weights_csv
from .henon import DivergedTrajectoryError, simulate_trained
from .model import InvalidArgumentError

log = logging.getLogger("pftrain")

SEED_ENV = "PFTRAIN_SEED"


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pftrain", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train a network with the particle and/or Kalman filter")
    train.add_argument("--config", type=Path, help="flat key = value config file (defaults: Henon experiment)")
    train.add_argument("--seed", type=_seed, help=f"experiment seed (falls back to ${SEED_ENV}, then the config)")
    train.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
    train.add_argument("--filter", choices=("pf", "kf", "both"), help="which filter(s) to run")

    replay = sub.add_parser("replay", help="iterate trained Henon weights and plot the attractor")
    replay.add_argument("--weights", type=Path, required=True, help="weights.csv or convergence.csv")
    replay.add_argument("--steps", type=int, default=5000)
    replay.add_argument("--out", type=Path, required=True)
    replay.add_argument("--init", default="0.1,0.1", help="two initial states, comma separated")
    return parser


def resolve_config(args, environ=os.environ) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else defaults_for("henon_affine")
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    elif environ.get(SEED_ENV):
        try:
            changes["seed"] = _seed(environ[SEED_ENV])
        except (ValueError, argparse.ArgumentTypeError):
            raise InvalidArgumentError(f"${SEED_ENV} is not a valid seed: {environ[SEED_ENV]!r}") from None
    if args.out is not None:
        changes["output_dir"] = args.out
    if args.filter is not None:
        changes["filter"] = args.filter
    return cfg.with_overrides(**changes) if changes else cfg


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    result = run_experiment(cfg)
    for name, rep in result.reports.items():
        est = " ".join(f"{v:.4f}" for v in rep.final_estimate)
        print(f"{name}: final weights [{est}]  dataset MSE {rep.final_dataset_mse:.4g}")
    print(f"outputs written to {cfg.output_dir}")
    return 0


def cmd_replay(args) -> int:
    x = read_weights_csv(args.weights)
    try:
        init = tuple(float(v) for v in args.init.split(","))
    except ValueError:
        raise InvalidArgumentError(f"--init must be two numbers, got {args.init!r}") from None
    if len(init) != 2:
        raise InvalidArgumentError("--init needs exactly two values")
    rep = simulate_trained(x, args.steps, init)
    args.out.mkdir(parents=True, exist_ok=True)
    write_weights_csv(x, args.out / "replay_weights.csv")
    with open(args.out / "replay.csv", "w") as fh:
        fh.write("step,xi\n")
        fh.writelines(f"{t},{v:.17g}\n" for t, v in enumerate(rep.states))
    write_attractor_svg(replay_points(rep), args.out / "attractor.svg")
    if rep.diverged:
        print(f"warning: replay diverged at step {rep.diverged_at}", file=sys.stderr)
    print(f"replayed {args.steps} steps; outputs written to {args.out}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "train":
            return cmd_train(args)
        return cmd_replay(args)
    except (InvalidArgumentError, DivergedTrajectoryError, OSError) as exc:
        print(f"pftrain: error: {exc}", file=sys.stderr)
        return 1
