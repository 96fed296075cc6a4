"""Core interaction loop: environment protocol, RNG streams, rollout storage.

Every environment emits two scalar rewards per step, a task reward and a
heuristic reward, kept as separate arrays end to end.  Episode ends are
split into `terminated` (the MDP reached an absorbing state) and
`truncated` (a step cap cut the episode short); the two are never both
true on the same step.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Fixed stream identifiers so that every consumer of randomness draws from
# its own generator and the draw order of one component cannot perturb
# another.  Values are arbitrary but frozen.
STREAM_ENV = 101
STREAM_POLICY_INIT = 202
STREAM_ACTION_SAMPLE = 303
STREAM_MINIBATCH = 404
STREAM_BOOTSTRAP = 505
STREAM_RANDOM_BASELINE = 606


@dataclass(frozen=True)
class RngStream:
    """A named substream of a root seed.

    Two streams with the same (seed, stream_id, member) triple always
    produce identical draws; streams with different ids are independent.
    `member` distinguishes instances within a role (e.g. parallel envs).
    """

    seed: int
    stream_id: int
    member: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(
            entropy=self.seed, spawn_key=(self.stream_id, self.member)
        )
        return np.random.default_rng(ss)


@dataclass(frozen=True)
class ActionSpec:
    """Discrete (`n` set) or box (`low`/`high` set) action space."""

    n: int | None = None
    low: np.ndarray | None = None
    high: np.ndarray | None = None

    @property
    def is_discrete(self) -> bool:
        return self.n is not None

    @property
    def dim(self) -> int:
        if self.is_discrete:
            return 1
        return int(self.low.shape[0])


@dataclass(frozen=True)
class Observation:
    features: np.ndarray
    state_index: int | None = None


@dataclass(frozen=True)
class StepOutcome:
    observation: Observation
    task_reward: float
    heuristic_reward: float
    terminated: bool
    truncated: bool

    def __post_init__(self):
        if self.terminated and self.truncated:
            raise ValueError("a step may terminate or truncate, not both")


class EnvBase:
    """Minimal episodic environment with dual rewards.

    Subclasses set `observation_dim` and `action_spec`, and implement
    `reset` and `step`.  Environments receive a Generator on every call so
    that all randomness is caller-owned.
    """

    observation_dim: int
    action_spec: ActionSpec
    max_episode_steps: int

    def reset(self, rng: np.random.Generator) -> Observation:
        raise NotImplementedError

    def step(self, action, rng: np.random.Generator) -> StepOutcome:
        raise NotImplementedError


@dataclass
class RolloutBatch:
    """Flat, time-major storage for `n_envs` lockstep trajectories.

    Arrays have length n_envs * n_ticks, laid out tick-major
    (tick 0 of all envs, then tick 1, ...).  `next_values` is filled in
    by the advantage estimator; `episode_starts[i]` is True when row i is
    the first step of a fresh episode.
    """

    observations: np.ndarray
    state_indices: np.ndarray  # -1 where the env has no discrete index
    actions: np.ndarray
    log_probs: np.ndarray
    task_rewards: np.ndarray
    heuristic_rewards: np.ndarray
    terminated: np.ndarray
    truncated: np.ndarray
    next_observations: np.ndarray
    n_envs: int
    n_ticks: int

    def __len__(self) -> int:
        return self.task_rewards.shape[0]

    @property
    def done(self) -> np.ndarray:
        return np.logical_or(self.terminated, self.truncated)


@dataclass
class EpisodeStats:
    """Undiscounted per-episode sums for finished episodes in a batch."""

    task_returns: list[float] = field(default_factory=list)
    heuristic_returns: list[float] = field(default_factory=list)
    successes: list[bool] = field(default_factory=list)

    def merged(self, other: "EpisodeStats") -> "EpisodeStats":
        return EpisodeStats(
            self.task_returns + other.task_returns,
            self.heuristic_returns + other.heuristic_returns,
            self.successes + other.successes,
        )


@dataclass
class EnvPool:
    """A set of identical envs stepped in lockstep, with running episode
    accumulators that persist across collection calls."""

    envs: list[EnvBase]
    rngs: list[np.random.Generator]
    current_obs: list[Observation] = field(default_factory=list)
    acc_task: np.ndarray | None = None
    acc_heur: np.ndarray | None = None

    @classmethod
    def build(cls, make_env, n_envs: int, seed: int, member_base: int = 0) -> "EnvPool":
        envs = [make_env() for _ in range(n_envs)]
        rngs = [
            RngStream(seed, STREAM_ENV, member_base + i).generator()
            for i in range(n_envs)
        ]
        pool = cls(envs=envs, rngs=rngs)
        pool.current_obs = [e.reset(r) for e, r in zip(envs, rngs)]
        pool.acc_task = np.zeros(n_envs)
        pool.acc_heur = np.zeros(n_envs)
        return pool

    @property
    def n_envs(self) -> int:
        return len(self.envs)


def collect_rollout(pool: EnvPool, policy, n_ticks: int,
                    action_rng: np.random.Generator) -> tuple[RolloutBatch, EpisodeStats]:
    """Step each env in `pool` for `n_ticks` under `policy`.

    Episodes ending mid-batch reset immediately.  The final tick of each
    env is marked truncated when the episode is still running, so value
    bootstrapping sees a proper cut point.  Returns the batch plus
    undiscounted stats for every episode that finished inside it.
    """
    n_envs = pool.n_envs
    obs_dim = pool.envs[0].observation_dim
    spec = pool.envs[0].action_spec
    total = n_envs * n_ticks

    obs_arr = np.empty((total, obs_dim))
    next_obs_arr = np.empty((total, obs_dim))
    sidx_arr = np.full(total, -1, dtype=np.int64)
    if spec.is_discrete:
        act_arr = np.empty(total, dtype=np.int64)
    else:
        act_arr = np.empty((total, spec.dim))
    logp_arr = np.empty(total)
    r_arr = np.empty(total)
    h_arr = np.empty(total)
    term_arr = np.zeros(total, dtype=bool)
    trunc_arr = np.zeros(total, dtype=bool)

    stats = EpisodeStats()

    for t in range(n_ticks):
        feats = np.stack([o.features for o in pool.current_obs])
        actions, logps = policy.sample(feats, action_rng)
        rows = slice(t * n_envs, (t + 1) * n_envs)
        obs_arr[rows] = feats
        sidx_arr[rows] = [
            -1 if o.state_index is None else o.state_index for o in pool.current_obs
        ]
        act_arr[rows] = actions
        logp_arr[rows] = logps

        for i in range(n_envs):
            out = pool.envs[i].step(actions[i], pool.rngs[i])
            row = t * n_envs + i
            r_arr[row] = out.task_reward
            h_arr[row] = out.heuristic_reward
            pool.acc_task[i] += out.task_reward
            pool.acc_heur[i] += out.heuristic_reward
            ended = out.terminated or out.truncated
            forced_cut = (t == n_ticks - 1) and not ended
            term_arr[row] = out.terminated
            trunc_arr[row] = out.truncated or forced_cut
            next_obs_arr[row] = out.observation.features
            if ended:
                stats.task_returns.append(float(pool.acc_task[i]))
                stats.heuristic_returns.append(float(pool.acc_heur[i]))
                stats.successes.append(bool(out.terminated and out.task_reward > 0))
                pool.acc_task[i] = 0.0
                pool.acc_heur[i] = 0.0
                pool.current_obs[i] = pool.envs[i].reset(pool.rngs[i])
            else:
                pool.current_obs[i] = out.observation

    batch = RolloutBatch(
        observations=obs_arr,
        state_indices=sidx_arr,
        actions=act_arr,
        log_probs=logp_arr,
        task_rewards=r_arr,
        heuristic_rewards=h_arr,
        terminated=term_arr,
        truncated=trunc_arr,
        next_observations=next_obs_arr,
        n_envs=n_envs,
        n_ticks=n_ticks,
    )
    return batch, stats


def discounted_return(rewards: np.ndarray, gamma: float) -> float:
    """Discounted sum of a single reward sequence."""
    rewards = np.asarray(rewards, dtype=float)
    if rewards.size == 0:
        return 0.0
    weights = gamma ** np.arange(rewards.size)
    return float(np.dot(weights, rewards))
