"""Advantage estimation and value-head fitting.

Two value heads exist per policy (one per reward stream), four heads in
total when a companion policy is present.  Each head carries a frozen
snapshot of its previous-iteration parameters: regression targets within
an iteration are the one-step temporal-difference values
``reward + gamma * V_snapshot(s') * (1 - terminated)``, and snapshots are
refreshed only after every head has been fitted.  All four heads are
regressed on the union of both collection buffers, so each head sees
samples gathered by the other policy as well.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .nets import AdamState, MlpSpec, ParamVector, adam_step, init_mlp_params, \
    mlp_forward, mlp_forward_tape
from .rollout import RolloutBatch


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class ValueHead:
    spec: MlpSpec
    params: ParamVector
    snapshot: ParamVector
    adam: AdamState

    @classmethod
    def create(cls, obs_dim: int, hidden: tuple[int, ...], activation: str,
               rng: np.random.Generator, lr: float) -> "ValueHead":
        spec = MlpSpec(obs_dim, tuple(hidden), 1, activation)
        params = init_mlp_params(spec, rng, output_gain=1.0)
        return cls(spec=spec, params=params, snapshot=params.copy(),
                   adam=AdamState.for_params(params, lr))

    def values(self, obs: np.ndarray, use_snapshot: bool = False) -> np.ndarray:
        params = self.snapshot if use_snapshot else self.params
        return mlp_forward(params, self.spec, obs)[:, 0]

    def refresh_snapshot(self) -> None:
        self.snapshot = self.params.copy()


@dataclass
class ValueHeads:
    """pi_* heads belong to the trained policy, ref_* to the companion."""

    pi_task: ValueHead
    pi_heur: ValueHead
    ref_task: ValueHead
    ref_heur: ValueHead

    def all_heads(self) -> list[ValueHead]:
        return [self.pi_task, self.pi_heur, self.ref_task, self.ref_heur]

    def refresh_snapshots(self) -> None:
        for head in self.all_heads():
            head.refresh_snapshot()


def gae(rewards: np.ndarray, values: np.ndarray, bootstrap_values: np.ndarray,
        terminated: np.ndarray, done: np.ndarray, gamma: float,
        lam: float) -> np.ndarray:
    """Generalized advantage estimation over one time-ordered stream.

    `bootstrap_values` holds V(s_{t+1}); termination zeroes the bootstrap
    while truncation keeps it.  `done` marks the last step of each episode
    segment and cuts the recursive accumulation.
    """
    for arr in (rewards, values, bootstrap_values):
        if not np.all(np.isfinite(arr)):
            raise ValueError("non-finite inputs to advantage estimation")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    n = len(rewards)
    adv = np.zeros(n)
    carry = 0.0
    for t in range(n - 1, -1, -1):
        delta = rewards[t] + gamma * bootstrap_values[t] * (1.0 - terminated[t]) - values[t]
        carry = delta + gamma * lam * (1.0 - done[t]) * carry
        adv[t] = carry
    return adv


def gae_columns(rewards: np.ndarray, values: np.ndarray,
                bootstrap_values: np.ndarray, terminated: np.ndarray,
                done: np.ndarray, gamma: float, lam: float) -> np.ndarray:
    """Vectorized GAE over (n_ticks, n_envs) columns; equals per-column gae()."""
    n_ticks = rewards.shape[0]
    adv = np.zeros_like(rewards)
    carry = np.zeros(rewards.shape[1])
    for t in range(n_ticks - 1, -1, -1):
        delta = rewards[t] + gamma * bootstrap_values[t] * (1.0 - terminated[t]) - values[t]
        carry = delta + gamma * lam * (1.0 - done[t]) * carry
        adv[t] = carry
    return adv


def _batch_gae(batch: RolloutBatch, head: ValueHead, rewards: np.ndarray,
               gamma: float, lam: float) -> np.ndarray:
    """GAE for one reward stream of a tick-major interleaved batch."""
    shape = (batch.n_ticks, batch.n_envs)
    values = head.values(batch.observations)
    bootstrap = head.values(batch.next_observations)
    adv = gae_columns(
        rewards.reshape(shape),
        values.reshape(shape),
        bootstrap.reshape(shape),
        batch.terminated.astype(float).reshape(shape),
        batch.done.astype(float).reshape(shape),
        gamma, lam,
    )
    return adv.reshape(-1)


@dataclass
class AdvantageSet:
    """Per-buffer advantages: `pi_*` over the trained policy's buffer with its
    own heads, `ref_*` over the companion's buffer with the companion heads,
    plus the two cross-policy task advantages the multiplier gradient needs
    (each policy's task head evaluated on the other policy's buffer)."""

    gamma: float
    lam: float
    pi_task: np.ndarray | None = None
    pi_heur: np.ndarray | None = None
    ref_task: np.ndarray | None = None
    ref_heur: np.ndarray | None = None
    cross_ref_task_on_pi: np.ndarray | None = None
    cross_pi_task_on_ref: np.ndarray | None = None


def compute_advantage_set(batch_pi: RolloutBatch | None,
                          batch_ref: RolloutBatch | None,
                          heads: ValueHeads, gamma: float,
                          lam: float) -> AdvantageSet:
    out = AdvantageSet(gamma=gamma, lam=lam)
    if batch_pi is not None:
        out.pi_task = _batch_gae(batch_pi, heads.pi_task, batch_pi.task_rewards, gamma, lam)
        out.pi_heur = _batch_gae(batch_pi, heads.pi_heur, batch_pi.heuristic_rewards, gamma, lam)
        out.cross_ref_task_on_pi = _batch_gae(
            batch_pi, heads.ref_task, batch_pi.task_rewards, gamma, lam)
    if batch_ref is not None:
        out.ref_task = _batch_gae(batch_ref, heads.ref_task, batch_ref.task_rewards, gamma, lam)
        out.ref_heur = _batch_gae(batch_ref, heads.ref_heur, batch_ref.heuristic_rewards, gamma, lam)
        out.cross_pi_task_on_ref = _batch_gae(
            batch_ref, heads.pi_task, batch_ref.task_rewards, gamma, lam)
    return out


def standardize(adv: np.ndarray) -> np.ndarray:
    """Shift to mean 0 and scale to unit std (positive scale, so the
    ordering of entries is preserved)."""
    return (adv - adv.mean()) / (adv.std() + 1e-8)


def _union_arrays(batches: list[RolloutBatch], attr: str) -> np.ndarray:
    return np.concatenate([getattr(b, attr) for b in batches], axis=0)


def fit_values_shared(heads: list[tuple[ValueHead, object]],
                      batches: list[RolloutBatch], gamma: float,
                      epochs: int, minibatches: int,
                      rng: np.random.Generator) -> None:
    """Regress each (head, reward stream) pair on the union of all batches.

    A stream is either 'task' / 'heuristic' (taken from the batches) or a
    precomputed per-step reward array over the union.  Targets come from
    the head's frozen snapshot; callers refresh snapshots after every head
    has been fitted.
    """
    if not batches:
        raise ValueError("value fitting needs at least one batch")
    obs = _union_arrays(batches, "observations")
    next_obs = _union_arrays(batches, "next_observations")
    terminated = _union_arrays(batches, "terminated").astype(float)
    streams = {
        "task": _union_arrays(batches, "task_rewards"),
        "heuristic": _union_arrays(batches, "heuristic_rewards"),
    }
    n = obs.shape[0]
    for head, stream in heads:
        if isinstance(stream, str):
            rewards = streams[stream]
        else:
            rewards = np.asarray(stream, dtype=float)
            if rewards.shape != (n,):
                raise ValueError("custom reward stream must cover the union")
        bootstrap = head.values(next_obs, use_snapshot=True)
        targets = rewards + gamma * bootstrap * (1.0 - terminated)
        for _ in range(epochs):
            order = rng.permutation(n)
            for shard in np.array_split(order, minibatches):
                leaf = ad.Tensor(head.params.values)
                pred = mlp_forward_tape(leaf, head.params, head.spec, obs[shard])
                err = ad.sub(ad.reshape(pred, (len(shard),)), targets[shard])
                loss = ad.mean(ad.mul(err, err))
                if loss.value > 1e6:
                    raise TrainingDiverged(
                        f"value regression loss {float(loss.value):.3e} exceeds 1e6")
                ad.backward(loss)
                adam_step(head.params, leaf.grad, head.adam)
