"""Sample-efficient learning of controlled dynamics with GP models and
information-gain acquisition over temporally extended actions."""

__version__ = "0.1.0"

from .dynamics import SystemSpec, TransitionTuple, lorenz_spec, pendulum_spec
from .gp import GPDataset, GPModel, GaussianBelief, KernelParams
from .planner import MPCPolicy, PlannerConfig, plan
from .acquisition import Candidate, EIGReport, PosteriorTrajectorySet
from .config import ExperimentConfig, default_config, load_config

__all__ = [
    "__version__",
    "SystemSpec",
    "TransitionTuple",
    "lorenz_spec",
    "pendulum_spec",
    "GPDataset",
    "GPModel",
    "GaussianBelief",
    "KernelParams",
    "MPCPolicy",
    "PlannerConfig",
    "plan",
    "Candidate",
    "EIGReport",
    "PosteriorTrajectorySet",
    "ExperimentConfig",
    "default_config",
    "load_config",
]
