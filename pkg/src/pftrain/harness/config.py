"""Experiment configuration in a flat ``key = value`` text format.

One setting per line, ``#`` starts a comment, section names are dotted
prefixes::

    problem = henon_affine        # or mlp_demo
    filter = both                 # pf, kf or both (kf needs an affine problem)
    seed = 7
    output_dir = runs/henon

    dataset.length = 2000         # number of training examples
    dataset.noise_std = 0.4472135955
    dataset.warmup = 100
    dataset.init = 0.1, 0.1

    tunings.q = 0.0632455532
    tunings.r = 0.2

    pf.num_particles = 1000
    pf.prior_mean = 0             # scalar (broadcast) or comma-separated vector
    pf.prior_cov_scale = 1
    pf.ess_threshold_fraction = 0.5

    kf.prior_mean = 0
    kf.prior_cov_scale = 1

    mlp.layer_sizes = 1, 8, 1
    replay.steps = 5000

Keys that are omitted take the defaults of the chosen ``problem``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..model import PAPER_Q, PAPER_R, InvalidArgumentError, NoiseSpec
from ..particle_filter import PFConfig

PROBLEMS = ("henon_affine", "mlp_demo")
FILTERS = ("pf", "kf", "both")


class ConfigError(InvalidArgumentError):
    pass


@dataclass(frozen=True)
class DatasetConfig:
    length: int = 2000
    noise_std: float = math.sqrt(PAPER_R)
    warmup: int = 100
    init: tuple[float, float] = (0.1, 0.1)


@dataclass(frozen=True)
class KFConfig:
    prior_mean: float | tuple[float, ...] = 0.0
    prior_cov_scale: float = 1.0


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "henon_affine"
    filter: str = "both"
    seed: int = 0
    output_dir: Path = Path("out")
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    tunings: NoiseSpec = field(default_factory=NoiseSpec)
    pf: PFConfig = field(default_factory=PFConfig)
    kf: KFConfig = field(default_factory=KFConfig)
    layer_sizes: tuple[int, ...] = (1, 8, 1)
    replay_steps: int = 5000

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem must be one of {PROBLEMS}, got {self.problem!r}")
        if self.filter not in FILTERS:
            raise ConfigError(f"filter must be one of {FILTERS}, got {self.filter!r}")
        if self.filter != "pf" and self.problem != "henon_affine":
            raise ConfigError("the Kalman filter is only available for the affine henon_affine problem")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        if self.dataset.length < 1:
            raise ConfigError("dataset.length must be positive")
        if self.replay_steps < 1:
            raise ConfigError("replay.steps must be positive")

    @property
    def pf_config(self) -> PFConfig:
        """PF settings with the experiment seed and tunings applied."""
        return dataclasses.replace(self.pf, noise=self.tunings, rng_seed=self.seed)

    def with_overrides(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def defaults_for(problem: str) -> ExperimentConfig:
    if problem == "mlp_demo":
        return ExperimentConfig(
            problem="mlp_demo",
            filter="pf",
            dataset=DatasetConfig(length=500, noise_std=0.1, warmup=0),
            tunings=NoiseSpec(q=0.004, r=0.05),
            pf=PFConfig(num_particles=2000),
        )
    if problem == "henon_affine":
        return ExperimentConfig(tunings=NoiseSpec(q=PAPER_Q, r=PAPER_R))
    raise ConfigError(f"problem must be one of {PROBLEMS}, got {problem!r}")


def parse_text(text: str) -> dict[str, str]:
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = value
    return entries


def _floats(value: str) -> tuple[float, ...]:
    return tuple(float(v) for v in value.split(",") if v.strip())


def _scalar_or_vector(value: str):
    vals = _floats(value)
    return vals[0] if len(vals) == 1 else vals


def _int(value: str) -> int:
    f = float(value)
    if f != int(f):
        raise ValueError(f"{value!r} is not an integer")
    return int(f)


def from_mapping(entries: dict[str, str]) -> ExperimentConfig:
    """Build a config from parsed ``key -> value`` strings."""
    entries = dict(entries)
    base = defaults_for(entries.pop("problem", "henon_affine").strip())
    top: dict = {}
    ds = dataclasses.asdict(base.dataset)
    tun = {"q": base.tunings.q, "r": base.tunings.r}
    pf = {f.name: getattr(base.pf, f.name) for f in dataclasses.fields(PFConfig)}
    kf = dataclasses.asdict(base.kf)
    parsers = {
        "filter": (top, "filter", str),
        "seed": (top, "seed", _int),
        "output_dir": (top, "output_dir", Path),
        "dataset.length": (ds, "length", _int),
        "dataset.noise_std": (ds, "noise_std", float),
        "dataset.warmup": (ds, "warmup", _int),
        "dataset.init": (ds, "init", _floats),
        "tunings.q": (tun, "q", float),
        "tunings.r": (tun, "r", float),
        "pf.num_particles": (pf, "num_particles", _int),
        "pf.prior_mean": (pf, "prior_mean", _scalar_or_vector),
        "pf.prior_cov_scale": (pf, "prior_cov_scale", float),
        "pf.ess_threshold_fraction": (pf, "ess_threshold_fraction", float),
        "kf.prior_mean": (kf, "prior_mean", _scalar_or_vector),
        "kf.prior_cov_scale": (kf, "prior_cov_scale", float),
        "mlp.layer_sizes": (top, "layer_sizes", lambda v: tuple(_int(s) for s in v.split(","))),
        "replay.steps": (top, "replay_steps", _int),
    }
    for key, value in entries.items():
        if key not in parsers:
            raise ConfigError(f"unknown config key {key!r}")
        target, name, parse = parsers[key]
        try:
            target[name] = parse(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None
    if len(ds["init"]) != 2:
        raise ConfigError("dataset.init needs exactly two values")
    ds["init"] = tuple(ds["init"])
    try:
        return dataclasses.replace(
            base,
            dataset=DatasetConfig(**ds),
            tunings=NoiseSpec(**tun),
            pf=PFConfig(**pf),
            kf=KFConfig(**kf),
            **top,
        )
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        return from_mapping(parse_text(text))
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
