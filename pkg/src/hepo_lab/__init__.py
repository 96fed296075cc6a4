"""Constrained dual-policy optimization with heuristic rewards.

The package trains a policy on a combination of task and heuristic rewards
under the constraint that it must not fall behind a heuristic-only companion
policy on the task reward alone. Alongside the constrained learner it ships
the standard single-policy baselines, small dual-reward environments with
exact tabular solvers, and the aggregate statistics used to score runs.
"""
from .alpha_control import AlphaConfig, AlphaState, estimate_gradient, update_alpha
from .composition import CompositionSpec, HurlSchedule, compose, hurl_beta
from .config import ALGORITHMS, ConfigError, ExperimentConfig, load_config, \
    parse_config, to_ini
from .envs import (
    GridGoal,
    PointMass,
    SparseChain,
    TabularMdp,
    discounted_occupancy,
    exact_advantage,
    policy_evaluation,
    policy_return,
    to_tabular,
    value_iteration,
)
from .stats import bootstrap_ci, iqm, normalized_return, probability_of_improvement
from .training import TrainRunState, random_reference_records, run_training

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "AlphaConfig",
    "AlphaState",
    "CompositionSpec",
    "ConfigError",
    "ExperimentConfig",
    "GridGoal",
    "HurlSchedule",
    "PointMass",
    "SparseChain",
    "TabularMdp",
    "TrainRunState",
    "bootstrap_ci",
    "compose",
    "discounted_occupancy",
    "estimate_gradient",
    "exact_advantage",
    "hurl_beta",
    "iqm",
    "load_config",
    "normalized_return",
    "parse_config",
    "policy_evaluation",
    "policy_return",
    "probability_of_improvement",
    "random_reference_records",
    "run_training",
    "to_tabular",
    "to_ini",
    "update_alpha",
    "value_iteration",
    "__version__",
]
