"""Restless-bandit laboratory: index policies, learners, and regret experiments."""

from .arms import Arm, BanditInstance, load_model, save_model
from .harness import ExperimentConfig, RegretCurve, fit_scaling, run_experiment
from .tsde import RunTrace, run_tsde
from .whittle import WhittleTable, compute_tables, select_actions, whittle_indices

__all__ = [
    "Arm",
    "BanditInstance",
    "ExperimentConfig",
    "RegretCurve",
    "RunTrace",
    "WhittleTable",
    "compute_tables",
    "fit_scaling",
    "load_model",
    "run_experiment",
    "run_tsde",
    "save_model",
    "select_actions",
    "whittle_indices",
    "__version__",
]

__version__ = "0.1.0"
