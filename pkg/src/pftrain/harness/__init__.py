from .config import ConfigError, ExperimentConfig, defaults_for, load_config
from .experiment import ExperimentReport, ExperimentResult, run_experiment
from .output import write_attractor_svg, write_convergence_csv

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentReport",
    "ExperimentResult",
    "defaults_for",
    "load_config",
    "run_experiment",
    "write_attractor_svg",
    "write_convergence_csv",
]
