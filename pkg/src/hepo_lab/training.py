"""Run orchestration: dual-policy constrained training and the
single-policy composed-reward baselines.

Each dual-policy iteration performs, in this order: collect (split
budget or alternating full budget), advantage estimation, trained-policy
update, companion update, shared value fitting (snapshot refresh after),
multiplier update, metric recording.  Every algorithm consumes exactly
`steps_per_iteration` env steps per iteration.  A run is fully
deterministic given (config, seed).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .advantages import (
    TrainingDiverged,
    ValueHead,
    ValueHeads,
    compute_advantage_set,
    fit_values_shared,
    gae_columns,
    standardize,
)
from .alpha_control import AlphaConfig, AlphaState, estimate_gradient, update_alpha
from .composition import CompositionSpec, HurlSchedule, compose
from .config import ConfigError, ExperimentConfig
from .envs import GridGoal, PointMass, SparseChain
from .nets import AdamState, Policy, make_policy
from .rollout import (
    STREAM_ACTION_SAMPLE,
    STREAM_MINIBATCH,
    STREAM_POLICY_INIT,
    STREAM_RANDOM_BASELINE,
    EnvPool,
    EpisodeStats,
    RngStream,
    RolloutBatch,
    collect_rollout,
)
from .stats import MetricRecord
from .surrogates import ClipConfig, Segment, mixed_utility, update_policy

DUAL_ALGORITHMS = ("hepo", "eipo_variant")
DUAL_STAGES = ("collect", "advantages", "policy_update", "companion_update",
               "value_fit", "alpha_update", "metrics")
BASELINE_STAGES = ("collect", "advantages", "policy_update", "value_fit", "metrics")


def build_env(cfg: ExperimentConfig):
    cap = cfg.max_episode_steps if cfg.max_episode_steps > 0 else None
    if cfg.env_kind == "sparse_chain":
        return SparseChain(
            n=cfg.chain_n,
            heuristic=cfg.heuristic or "potential_shaping",
            gamma=cfg.gamma,
            max_episode_steps=cap,
            trap_states=None,
            trap_bonus=cfg.trap_bonus,
            penalty_weight=cfg.penalty_weight,
        )
    if cfg.env_kind == "grid_goal":
        goal = None if cfg.goal is None else (int(cfg.goal[0]), int(cfg.goal[1]))
        start = (int(cfg.start[0]), int(cfg.start[1]))
        return GridGoal(
            width=cfg.width, height=cfg.height, start=start, goal=goal,
            heuristic=cfg.heuristic or "potential_shaping", gamma=cfg.gamma,
            slip_prob=cfg.slip_prob, max_episode_steps=cap,
            trap_cells=cfg.trap_cells, trap_bonus=cfg.trap_bonus,
            penalty_weight=cfg.penalty_weight,
        )
    goal = (0.7, 0.7) if cfg.goal is None else (float(cfg.goal[0]), float(cfg.goal[1]))
    return PointMass(goal=goal, goal_radius=cfg.goal_radius,
                     max_episode_steps=cap if cap else 120)


def clip_config(cfg: ExperimentConfig) -> ClipConfig:
    return ClipConfig(
        clip_epsilon=cfg.clip_epsilon, epochs=cfg.epochs,
        minibatches=cfg.minibatches, learning_rate=cfg.learning_rate,
        entropy_coef=cfg.entropy_coef, max_grad_norm=cfg.max_grad_norm,
        minibatch_mixing=cfg.minibatch_mixing,
    )


def composition_spec(cfg: ExperimentConfig) -> CompositionSpec:
    horizon = cfg.hurl_horizon if cfg.hurl_horizon > 0 else cfg.iterations
    return CompositionSpec(
        kind=cfg.algorithm, lam=cfg.lambda_weight,
        hurl=HurlSchedule(cfg.hurl_beta0, cfg.hurl_beta_final, horizon,
                          cfg.hurl_shape),
    )


class UniformRandomPolicy:
    """Action-sampling stub for the random reference runs."""

    def __init__(self, action_spec):
        self.action_spec = action_spec

    def sample(self, obs: np.ndarray, rng: np.random.Generator):
        n = obs.shape[0]
        if self.action_spec.is_discrete:
            k = self.action_spec.n
            actions = rng.integers(0, k, size=n)
            logps = np.full(n, -np.log(k))
            return actions, logps
        low, high = self.action_spec.low, self.action_spec.high
        actions = rng.uniform(low, high, size=(n, self.action_spec.dim))
        logps = np.full(n, -float(np.sum(np.log(high - low))))
        return actions, logps


@dataclass
class Learner:
    policy: Policy
    adam: AdamState

    @classmethod
    def create(cls, cfg: ExperimentConfig, env, rng: np.random.Generator) -> "Learner":
        kind = "categorical" if env.action_spec.is_discrete else "gaussian"
        action_dim = env.action_spec.n if env.action_spec.is_discrete \
            else env.action_spec.dim
        policy = make_policy(kind, env.observation_dim, action_dim,
                             cfg.hidden_sizes, cfg.activation, rng)
        return cls(policy=policy,
                   adam=AdamState.for_params(policy.params, cfg.learning_rate))


@dataclass
class TrainRunState:
    config: ExperimentConfig
    seed: int
    pi: Learner
    ref: Learner | None
    heads: ValueHeads | None
    baseline_head: ValueHead | None
    alpha: AlphaState
    pool_pi: EnvPool
    pool_ref: EnvPool | None
    rng_actions_pi: np.random.Generator
    rng_actions_ref: np.random.Generator | None
    rng_minibatch: np.random.Generator
    iteration: int = 0
    env_steps: int = 0
    records: list[MetricRecord] = field(default_factory=list)
    pi_collects_next: bool = True
    mean_cross_ref: float | None = None
    mean_cross_pi: float | None = None
    last_pi_stats: tuple[float, float, float] = (0.0, 0.0, 0.0)
    last_ref_stats: tuple[float, float, float] = (0.0, 0.0, 0.0)


def _check_budget(cfg: ExperimentConfig) -> None:
    dual = cfg.algorithm in DUAL_ALGORITHMS
    if dual and cfg.rollout == "joint":
        if cfg.steps_per_iteration % (2 * cfg.parallel_envs) != 0:
            raise ConfigError(
                "steps_per_iteration must divide evenly into 2 * parallel_envs "
                "lockstep slots for a joint dual-policy run")
    elif cfg.steps_per_iteration % cfg.parallel_envs != 0:
        raise ConfigError("steps_per_iteration must be a multiple of parallel_envs")


def init_run(cfg: ExperimentConfig, seed: int) -> TrainRunState:
    _check_budget(cfg)
    dual = cfg.algorithm in DUAL_ALGORITHMS
    probe_env = build_env(cfg)
    obs_dim = probe_env.observation_dim
    p = cfg.parallel_envs

    init_rng = lambda member: RngStream(seed, STREAM_POLICY_INIT, member).generator()
    pi = Learner.create(cfg, probe_env, init_rng(0))
    pool_pi = EnvPool.build(lambda: build_env(cfg), p, seed, member_base=0)
    rng_pi = RngStream(seed, STREAM_ACTION_SAMPLE, 0).generator()
    rng_mb = RngStream(seed, STREAM_MINIBATCH, 0).generator()

    ref = None
    pool_ref = None
    rng_ref = None
    heads = None
    baseline_head = None
    if dual:
        ref = Learner.create(cfg, probe_env, init_rng(1))
        pool_ref = EnvPool.build(lambda: build_env(cfg), p, seed, member_base=p)
        rng_ref = RngStream(seed, STREAM_ACTION_SAMPLE, 1).generator()
        heads = ValueHeads(
            pi_task=ValueHead.create(obs_dim, cfg.hidden_sizes, cfg.activation,
                                     init_rng(2), cfg.value_learning_rate),
            pi_heur=ValueHead.create(obs_dim, cfg.hidden_sizes, cfg.activation,
                                     init_rng(3), cfg.value_learning_rate),
            ref_task=ValueHead.create(obs_dim, cfg.hidden_sizes, cfg.activation,
                                      init_rng(4), cfg.value_learning_rate),
            ref_heur=ValueHead.create(obs_dim, cfg.hidden_sizes, cfg.activation,
                                      init_rng(5), cfg.value_learning_rate),
        )
    else:
        baseline_head = ValueHead.create(obs_dim, cfg.hidden_sizes, cfg.activation,
                                         init_rng(2), cfg.value_learning_rate)

    alpha = AlphaState.create(alpha_config(cfg))
    return TrainRunState(
        config=cfg, seed=seed, pi=pi, ref=ref, heads=heads,
        baseline_head=baseline_head, alpha=alpha, pool_pi=pool_pi,
        pool_ref=pool_ref, rng_actions_pi=rng_pi, rng_actions_ref=rng_ref,
        rng_minibatch=rng_mb,
    )


def alpha_config(cfg: ExperimentConfig) -> AlphaConfig:
    return AlphaConfig(alpha_init=cfg.alpha_init, step_size=cfg.alpha_step_size,
                       delta_clip=cfg.alpha_delta_clip, window=cfg.alpha_window)


def _stats_summary(stats: EpisodeStats) -> tuple[float, float, float] | None:
    if not stats.task_returns:
        return None
    return (
        float(np.mean(stats.task_returns)),
        float(np.mean(stats.heuristic_returns)),
        float(np.mean(stats.successes)),
    )


def _maybe_standardize(adv: np.ndarray, enabled: bool) -> np.ndarray:
    return standardize(adv) if enabled else adv


def _column_next_heuristic(batch: RolloutBatch) -> np.ndarray:
    """Next-step heuristic values with zeros at episode ends, respecting the
    tick-major interleaved layout."""
    shape = (batch.n_ticks, batch.n_envs)
    h = batch.heuristic_rewards.reshape(shape)
    h_next = np.zeros_like(h)
    h_next[:-1] = h[1:]
    h_next[batch.done.reshape(shape)] = 0.0
    return h_next.reshape(-1)


def hepo_iteration(state: TrainRunState, trace=None) -> None:
    """One constrained dual-policy iteration (see module docstring)."""
    note = trace if trace is not None else (lambda stage: None)
    cfg = state.config
    ccfg = clip_config(cfg)
    b = cfg.steps_per_iteration
    p = cfg.parallel_envs
    alpha = state.alpha.alpha
    task_reference = cfg.reference_policy == "task"

    try:
        if cfg.rollout == "joint":
            batch_pi, stats_pi = collect_rollout(
                state.pool_pi, state.pi.policy, (b // 2) // p, state.rng_actions_pi)
            batch_ref, stats_ref = collect_rollout(
                state.pool_ref, state.ref.policy, (b // 2) // p, state.rng_actions_ref)
        elif state.pi_collects_next:
            batch_pi, stats_pi = collect_rollout(
                state.pool_pi, state.pi.policy, b // p, state.rng_actions_pi)
            batch_ref, stats_ref = None, None
            state.pi_collects_next = False
        else:
            batch_pi, stats_pi = None, None
            batch_ref, stats_ref = collect_rollout(
                state.pool_ref, state.ref.policy, b // p, state.rng_actions_ref)
            state.pi_collects_next = True
        note("collect")

        adv = compute_advantage_set(batch_pi, batch_ref, state.heads,
                                    cfg.gamma, cfg.gae_lambda)
        note("advantages")

        norm = cfg.advantage_norm
        pi_segments = []
        ref_segments = []
        if batch_pi is not None:
            a_task = _maybe_standardize(adv.pi_task, norm)
            a_heur = _maybe_standardize(adv.pi_heur, norm)
            pi_segments.append(Segment(
                batch_pi.observations, batch_pi.actions, batch_pi.log_probs,
                mixed_utility(a_task, a_heur, alpha)))
            ref_segments.append(Segment(
                batch_pi.observations, batch_pi.actions, batch_pi.log_probs,
                a_task if task_reference else a_heur))
        if batch_ref is not None:
            a_task = _maybe_standardize(adv.ref_task, norm)
            a_heur = _maybe_standardize(adv.ref_heur, norm)
            pi_segments.append(Segment(
                batch_ref.observations, batch_ref.actions, batch_ref.log_probs,
                mixed_utility(a_task, a_heur, alpha)))
            ref_segments.append(Segment(
                batch_ref.observations, batch_ref.actions, batch_ref.log_probs,
                a_task if task_reference else a_heur))

        update_policy(state.pi.policy, state.pi.adam, pi_segments, ccfg,
                      state.rng_minibatch)
        note("policy_update")

        update_policy(state.ref.policy, state.ref.adam, ref_segments, ccfg,
                      state.rng_minibatch)
        note("companion_update")

        batches = [bt for bt in (batch_pi, batch_ref) if bt is not None]
        fit_values_shared(
            [(state.heads.pi_task, "task"), (state.heads.pi_heur, "heuristic"),
             (state.heads.ref_task, "task"), (state.heads.ref_heur, "heuristic")],
            batches, cfg.gamma, cfg.value_epochs, cfg.minibatches,
            state.rng_minibatch)
        state.heads.refresh_snapshots()
        note("value_fit")

        if adv.cross_ref_task_on_pi is not None:
            state.mean_cross_ref = float(adv.cross_ref_task_on_pi.mean())
        if adv.cross_pi_task_on_ref is not None:
            state.mean_cross_pi = float(adv.cross_pi_task_on_ref.mean())
        if state.mean_cross_ref is not None and state.mean_cross_pi is not None:
            g = state.mean_cross_ref - state.mean_cross_pi
            update_alpha(state.alpha, g, alpha_config(cfg))
        note("alpha_update")
    except (TrainingDiverged, FloatingPointError) as exc:
        raise TrainingDiverged(f"iteration {state.iteration}: {exc}") from exc

    if stats_pi is not None:
        summary = _stats_summary(stats_pi)
        if summary is not None:
            state.last_pi_stats = summary
    if stats_ref is not None:
        summary = _stats_summary(stats_ref)
        if summary is not None:
            state.last_ref_stats = summary
    _record(state)
    note("metrics")


def baseline_iteration(state: TrainRunState, trace=None) -> None:
    """One single-policy iteration on a composed reward stream."""
    note = trace if trace is not None else (lambda stage: None)
    cfg = state.config
    ccfg = clip_config(cfg)
    spec = composition_spec(cfg)
    try:
        batch, stats = collect_rollout(
            state.pool_pi, state.pi.policy,
            cfg.steps_per_iteration // cfg.parallel_envs, state.rng_actions_pi)
        note("collect")

        h_next = _column_next_heuristic(batch)
        composed = compose(spec, batch.task_rewards, batch.heuristic_rewards,
                           h_next, cfg.gamma, state.iteration)
        shape = (batch.n_ticks, batch.n_envs)
        values = state.baseline_head.values(batch.observations)
        bootstrap = state.baseline_head.values(batch.next_observations)
        adv = gae_columns(
            composed.reshape(shape), values.reshape(shape),
            bootstrap.reshape(shape),
            batch.terminated.astype(float).reshape(shape),
            batch.done.astype(float).reshape(shape),
            cfg.gamma, cfg.gae_lambda,
        ).reshape(-1)
        note("advantages")

        adv = _maybe_standardize(adv, cfg.advantage_norm)
        update_policy(state.pi.policy, state.pi.adam,
                      [Segment(batch.observations, batch.actions,
                               batch.log_probs, adv)],
                      ccfg, state.rng_minibatch)
        note("policy_update")

        fit_values_shared([(state.baseline_head, composed)], [batch], cfg.gamma,
                          cfg.value_epochs, cfg.minibatches, state.rng_minibatch)
        state.baseline_head.refresh_snapshot()
        note("value_fit")
    except (TrainingDiverged, FloatingPointError) as exc:
        raise TrainingDiverged(f"iteration {state.iteration}: {exc}") from exc

    summary = _stats_summary(stats)
    if summary is not None:
        state.last_pi_stats = summary
    _record(state)
    note("metrics")


def _record(state: TrainRunState) -> None:
    state.iteration += 1
    state.env_steps += state.config.steps_per_iteration
    j, h, success = state.last_pi_stats
    state.records.append(MetricRecord(
        algorithm=state.config.label, seed=state.seed,
        iteration=state.iteration, env_steps=state.env_steps,
        j_return=j, h_return=h, alpha=state.alpha.alpha,
        success_rate=success,
    ))


def run_training(cfg: ExperimentConfig, seed: int, trace=None,
                 progress=None) -> TrainRunState:
    """Train one run to completion; returns the final state with records."""
    state = init_run(cfg, seed)
    step = hepo_iteration if cfg.algorithm in DUAL_ALGORITHMS else baseline_iteration
    for _ in range(cfg.iterations):
        step(state, trace)
        if progress is not None:
            progress(state.records[-1])
    return state


def random_reference_records(cfg: ExperimentConfig, seed: int) -> list[MetricRecord]:
    """Evaluate a uniform-random policy for `random_eval_steps` env steps."""
    env = build_env(cfg)
    policy = UniformRandomPolicy(env.action_spec)
    pool = EnvPool.build(lambda: build_env(cfg), cfg.parallel_envs, seed,
                         member_base=0)
    rng = RngStream(seed, STREAM_RANDOM_BASELINE, 0).generator()
    ticks = max(1, cfg.random_eval_steps // cfg.parallel_envs)
    _, stats = collect_rollout(pool, policy, ticks, rng)
    summary = _stats_summary(stats) or (0.0, 0.0, 0.0)
    return [MetricRecord(
        algorithm="random", seed=seed, iteration=1,
        env_steps=ticks * cfg.parallel_envs, j_return=summary[0],
        h_return=summary[1], alpha=0.0, success_rate=summary[2],
    )]
