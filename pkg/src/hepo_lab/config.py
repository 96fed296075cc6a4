"""Experiment configuration: flat INI-style text with typed, validated keys.

Every key lives in one of five sections and has a default; unknown
sections or keys are rejected by name.  `to_ini` materializes every
default, so parse -> serialize -> parse is the identity on the typed
config.
"""
from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass

ALGORITHMS = ("hepo", "eipo_variant", "j_only", "h_only", "j_plus_h", "pbrs", "hurl")
ENV_KINDS = ("sparse_chain", "grid_goal", "point_mass")
RANDOM_ALGORITHM = "random"  # reserved label for reference runs


class ConfigError(ValueError):
    pass


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_int_list(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(int(part) for part in text.split(","))


def _parse_pair(text: str) -> tuple[float, float] | None:
    text = text.strip()
    if not text:
        return None
    parts = text.split(",")
    if len(parts) != 2:
        raise ConfigError(f"expected 'x,y', got {text!r}")
    return (float(parts[0]), float(parts[1]))


def _parse_cells(text: str) -> tuple[tuple[int, int], ...] | None:
    text = text.strip()
    if not text:
        return None
    cells = []
    for item in text.split(";"):
        pair = _parse_pair(item)
        cells.append((int(pair[0]), int(pair[1])))
    return tuple(cells)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return ";".join(f"{int(x)},{int(y)}" for x, y in value)
        return ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class ExperimentConfig:
    # [run]
    name: str = "experiment"
    algorithm: str = "hepo"
    run_label: str = ""
    seeds: tuple[int, ...] = (0, 1, 2)
    iterations: int = 150
    steps_per_iteration: int = 2048
    parallel_envs: int = 16
    out_dir: str = "out"
    random_eval_steps: int = 20000
    # [env]
    env_kind: str = "grid_goal"
    chain_n: int = 25
    width: int = 6
    height: int = 6
    start: tuple[float, float] | None = (0.0, 0.0)
    goal: tuple[float, float] | None = None
    slip_prob: float = 0.0
    max_episode_steps: int = 0
    heuristic: str = ""
    trap_cells: tuple[tuple[int, int], ...] | None = None
    trap_bonus: float = 0.05
    penalty_weight: float = 5.0
    goal_radius: float = 0.2
    # [algorithm]
    lambda_weight: float = 1.0
    hurl_beta0: float = 0.3
    hurl_beta_final: float = 1.0
    hurl_horizon: int = 0
    hurl_shape: str = "linear"
    rollout: str = "joint"
    reference_policy: str = "heuristic"
    # [ppo]
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_epsilon: float = 0.2
    epochs: int = 4
    minibatches: int = 4
    learning_rate: float = 3e-4
    value_learning_rate: float = 1e-3
    value_epochs: int = 4
    entropy_coef: float = 0.0
    advantage_norm: bool = True
    max_grad_norm: float = 0.0
    hidden_sizes: tuple[int, ...] = (64, 64)
    activation: str = "tanh"
    minibatch_mixing: str = "stratified"
    # [alpha]
    alpha_init: float = 0.0
    alpha_step_size: float = 0.01
    alpha_delta_clip: float = 1.0
    alpha_window: int = 8

    @property
    def label(self) -> str:
        return self.run_label or self.algorithm


# section -> key -> (field name, parser, formatter input from field)
_SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "run": {
        "name": ("name", str),
        "algorithm": ("algorithm", str),
        "run_label": ("run_label", str),
        "seeds": ("seeds", _parse_int_list),
        "iterations": ("iterations", int),
        "steps_per_iteration": ("steps_per_iteration", int),
        "parallel_envs": ("parallel_envs", int),
        "out_dir": ("out_dir", str),
        "random_eval_steps": ("random_eval_steps", int),
    },
    "env": {
        "kind": ("env_kind", str),
        "n": ("chain_n", int),
        "width": ("width", int),
        "height": ("height", int),
        "start": ("start", _parse_pair),
        "goal": ("goal", _parse_pair),
        "slip_prob": ("slip_prob", float),
        "max_episode_steps": ("max_episode_steps", int),
        "heuristic": ("heuristic", str),
        "trap_cells": ("trap_cells", _parse_cells),
        "trap_bonus": ("trap_bonus", float),
        "penalty_weight": ("penalty_weight", float),
        "goal_radius": ("goal_radius", float),
    },
    "algorithm": {
        "lambda_weight": ("lambda_weight", float),
        "hurl_beta0": ("hurl_beta0", float),
        "hurl_beta_final": ("hurl_beta_final", float),
        "hurl_horizon": ("hurl_horizon", int),
        "hurl_shape": ("hurl_shape", str),
        "rollout": ("rollout", str),
        "reference_policy": ("reference_policy", str),
    },
    "ppo": {
        "gamma": ("gamma", float),
        "gae_lambda": ("gae_lambda", float),
        "clip_epsilon": ("clip_epsilon", float),
        "epochs": ("epochs", int),
        "minibatches": ("minibatches", int),
        "learning_rate": ("learning_rate", float),
        "value_learning_rate": ("value_learning_rate", float),
        "value_epochs": ("value_epochs", int),
        "entropy_coef": ("entropy_coef", float),
        "advantage_norm": ("advantage_norm", _parse_bool),
        "max_grad_norm": ("max_grad_norm", float),
        "hidden_sizes": ("hidden_sizes", _parse_int_list),
        "activation": ("activation", str),
        "minibatch_mixing": ("minibatch_mixing", str),
    },
    "alpha": {
        "alpha_init": ("alpha_init", float),
        "step_size": ("alpha_step_size", float),
        "delta_clip": ("alpha_delta_clip", float),
        "window": ("alpha_window", int),
    },
}

_CHOICES = {
    "algorithm": ALGORITHMS,
    "env_kind": ENV_KINDS,
    "hurl_shape": ("linear", "exponential"),
    "rollout": ("joint", "alternating"),
    "reference_policy": ("heuristic", "task"),
    "activation": ("tanh", "relu"),
    "minibatch_mixing": ("stratified", "separate"),
}


def _validate(cfg: ExperimentConfig) -> ExperimentConfig:
    for field_name, choices in _CHOICES.items():
        value = getattr(cfg, field_name)
        if value not in choices:
            raise ConfigError(
                f"invalid value {value!r} for {field_name}; expected one of {choices}")
    if not cfg.seeds:
        raise ConfigError("seeds must not be empty")
    if cfg.iterations < 1 or cfg.steps_per_iteration < 1 or cfg.parallel_envs < 1:
        raise ConfigError("iterations, steps_per_iteration, parallel_envs must be >= 1")
    if not 0.0 < cfg.gamma <= 1.0 or not 0.0 <= cfg.gae_lambda <= 1.0:
        raise ConfigError("gamma must be in (0, 1], gae_lambda in [0, 1]")
    if cfg.heuristic:
        valid = ("potential_shaping", "wrong_sign_distance", "action_penalty",
                 "trap_lure", "negative_distance")
        if cfg.heuristic not in valid:
            raise ConfigError(f"unknown heuristic {cfg.heuristic!r}")
        if cfg.env_kind == "point_mass" and cfg.heuristic != "negative_distance":
            raise ConfigError("point_mass supports only the negative_distance heuristic")
        if cfg.env_kind != "point_mass" and cfg.heuristic == "negative_distance":
            raise ConfigError("negative_distance applies only to point_mass")
    return cfg


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    values: dict[str, object] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown config key '{key}' in section [{section}]")
            field_name, converter = _SCHEMA[section][key]
            try:
                values[field_name] = converter(raw)
            except ConfigError:
                raise
            except (TypeError, ValueError) as exc:
                raise ConfigError(
                    f"invalid value {raw!r} for '{key}' in [{section}]: {exc}") from exc
    return _validate(ExperimentConfig(**values))


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def to_ini(cfg: ExperimentConfig) -> str:
    """Serialize with every default materialized."""
    out = io.StringIO()
    for section, keys in _SCHEMA.items():
        out.write(f"[{section}]\n")
        for key, (field_name, _) in keys.items():
            out.write(f"{key} = {_fmt(getattr(cfg, field_name))}\n")
        out.write("\n")
    return out.getvalue()


def replace(cfg: ExperimentConfig, **kwargs) -> ExperimentConfig:
    return _validate(dataclasses.replace(cfg, **kwargs))
