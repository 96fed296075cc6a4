"""Clipped-surrogate policy optimization over one or two sample buffers.

The trained policy maximizes a sum of clipped surrogates, one per buffer,
each using that buffer's collecting policy as the behavior distribution
and a per-step utility array:

  - trained policy:  U = (1 + alpha) * A_task + A_heur on its own buffer,
    and the companion's mixed utility on the companion's buffer;
  - companion:       heuristic advantages only (task advantages for the
    task-reference ablation), again over both buffers.

Single-policy baselines use the same machinery with one buffer whose
utilities are advantages of a composed reward stream.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .advantages import TrainingDiverged
from .nets import AdamState, Policy, adam_step, clip_gradient_norm, \
    policy_entropy_tape, policy_log_prob_tape

MIXING_MODES = ("stratified", "separate")


@dataclass(frozen=True)
class ClipConfig:
    clip_epsilon: float = 0.2
    epochs: int = 4
    minibatches: int = 4
    learning_rate: float = 3e-4
    entropy_coef: float = 0.0
    max_grad_norm: float = 0.0  # 0 disables clipping
    minibatch_mixing: str = "stratified"

    def __post_init__(self):
        if not 0.0 <= self.clip_epsilon <= 1.0:
            raise ValueError("clip threshold must lie in [0, 1]")
        if self.epochs < 1 or self.minibatches < 1:
            raise ValueError("epochs and minibatches must be >= 1")
        if self.minibatch_mixing not in MIXING_MODES:
            raise ValueError(f"unknown minibatch mixing {self.minibatch_mixing!r}")


@dataclass
class Segment:
    """One buffer's contribution to a policy objective."""

    observations: np.ndarray
    actions: np.ndarray
    behavior_log_probs: np.ndarray
    utilities: np.ndarray

    def __post_init__(self):
        n = self.observations.shape[0]
        if not (len(self.actions) == len(self.behavior_log_probs)
                == len(self.utilities) == n):
            raise ValueError("segment arrays must share their length")
        if not np.all(np.isfinite(self.utilities)):
            raise ValueError("utilities must be finite")


def mixed_utility(a_task: np.ndarray, a_heur: np.ndarray, alpha: float) -> np.ndarray:
    """(1 + alpha) * A_task + A_heur, elementwise."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    a_task = np.asarray(a_task, dtype=float)
    a_heur = np.asarray(a_heur, dtype=float)
    if a_task.shape != a_heur.shape:
        raise ValueError("advantage arrays must share their shape")
    out = (1.0 + alpha) * a_task + a_heur
    if not np.all(np.isfinite(out)):
        raise ValueError("mixed utility must be finite")
    return out


def clipped_terms(ratios: np.ndarray, utilities: np.ndarray,
                  clip_epsilon: float) -> np.ndarray:
    """Per-step min{ratio * U, clip(ratio) * U}; a pointwise lower bound
    on ratio * U."""
    ratios = np.asarray(ratios, dtype=float)
    if np.any(ratios <= 0.0):
        raise ValueError("ratios must be positive")
    clipped = np.clip(ratios, 1.0 - clip_epsilon, 1.0 + clip_epsilon)
    return np.minimum(ratios * utilities, clipped * utilities)


def clipped_surrogate(ratios: np.ndarray, utilities: np.ndarray,
                      clip_epsilon: float) -> float:
    """Mean of the per-step clipped terms over one buffer."""
    return float(clipped_terms(ratios, utilities, clip_epsilon).mean())


def surrogate_value(policy: Policy, segments: list[Segment],
                    clip_epsilon: float) -> float:
    """Current value of the summed objective (no entropy term)."""
    total = 0.0
    for seg in segments:
        logp = policy.log_prob(seg.observations, seg.actions)
        ratios = np.exp(logp - seg.behavior_log_probs)
        total += clipped_surrogate(ratios, seg.utilities, clip_epsilon)
    return total


def _segment_surrogate_tape(policy: Policy, leaf: ad.Tensor, seg: Segment,
                            idx: np.ndarray, clip_epsilon: float) -> ad.Tensor:
    logp = policy_log_prob_tape(policy, leaf, seg.observations[idx], seg.actions[idx])
    ratios = ad.exp(ad.sub(logp, seg.behavior_log_probs[idx]))
    unclipped = ad.mul(ratios, seg.utilities[idx])
    clipped = ad.mul(ad.clip(ratios, 1.0 - clip_epsilon, 1.0 + clip_epsilon),
                     seg.utilities[idx])
    return ad.mean(ad.minimum(unclipped, clipped))


def _apply_step(policy: Policy, adam: AdamState, segments_and_idx, cfg: ClipConfig) -> None:
    leaf = ad.Tensor(policy.params.values)
    objective = None
    for seg, idx in segments_and_idx:
        if len(idx) == 0:
            continue
        term = _segment_surrogate_tape(policy, leaf, seg, idx, cfg.clip_epsilon)
        objective = term if objective is None else ad.add(objective, term)
    if objective is None:
        return
    if cfg.entropy_coef > 0.0:
        obs = np.concatenate([seg.observations[idx]
                              for seg, idx in segments_and_idx if len(idx)], axis=0)
        entropy = policy_entropy_tape(policy, leaf, obs)
        objective = ad.add(objective, ad.mul(entropy, cfg.entropy_coef))
    loss = ad.mul(objective, -1.0)
    if not np.isfinite(loss.value):
        raise TrainingDiverged("policy objective is not finite")
    ad.backward(loss)
    grad = leaf.grad
    if cfg.max_grad_norm > 0.0:
        grad = clip_gradient_norm(grad, cfg.max_grad_norm)
    adam_step(policy.params, grad, adam)


def update_policy(policy: Policy, adam: AdamState, segments: list[Segment],
                  cfg: ClipConfig, rng: np.random.Generator) -> None:
    """Epochs of minibatch ascent on the summed clipped surrogate.

    Stratified mixing shards every buffer each epoch and steps on matching
    shards together, so each gradient step sees both buffers in their
    global proportion; `separate` steps on one buffer's shard at a time.
    """
    segments = [seg for seg in segments if seg.observations.shape[0] > 0]
    if not segments:
        raise ValueError("policy update needs at least one non-empty segment")
    for _ in range(cfg.epochs):
        shards = [np.array_split(rng.permutation(len(seg.utilities)), cfg.minibatches)
                  for seg in segments]
        for k in range(cfg.minibatches):
            if cfg.minibatch_mixing == "stratified":
                _apply_step(policy, adam,
                            [(seg, shards[j][k]) for j, seg in enumerate(segments)],
                            cfg)
            else:
                for j, seg in enumerate(segments):
                    _apply_step(policy, adam, [(seg, shards[j][k])], cfg)
