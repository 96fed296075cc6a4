"""Exact dynamic-programming layer for the enumerable environments.

A `TabularMdp` stores the transition tensor P[s, a, s'], expected task
and heuristic reward tables R[s, a] and Hr[s, a] (expectations over the
landing state, which leave all values and advantages unchanged), the
discount, the initial-state distribution, and a terminal-state mask.
Terminal states are absorbing with zero reward.

The operations here are the ground-truth side of the test suite: value
iteration (greedy ties break to the lowest action index), iterative
policy evaluation, exact advantages, and the discounted occupancy
measure via a direct linear solve.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TabularMdp:
    p: np.ndarray          # (S, A, S)
    r: np.ndarray          # (S, A) expected task reward
    h: np.ndarray          # (S, A) expected heuristic reward
    gamma: float
    start: np.ndarray      # (S,)
    terminal: np.ndarray   # (S,) bool

    def __post_init__(self):
        s, a, s2 = self.p.shape
        if s != s2 or self.r.shape != (s, a) or self.h.shape != (s, a):
            raise ValueError("inconsistent table shapes")
        row_sums = self.p.sum(axis=2)
        if not np.all(np.abs(row_sums - 1.0) < 1e-12):
            raise ValueError("transition rows must sum to 1")
        if not (np.all(np.isfinite(self.r)) and np.all(np.isfinite(self.h))):
            raise ValueError("rewards must be finite")
        if abs(self.start.sum() - 1.0) > 1e-12:
            raise ValueError("initial distribution must sum to 1")

    @property
    def n_states(self) -> int:
        return self.p.shape[0]

    @property
    def n_actions(self) -> int:
        return self.p.shape[1]


def to_tabular(env) -> TabularMdp:
    """Enumerate a discrete env's exact dynamics and reward tables."""
    required = ("n_states", "transitions", "initial_state_distribution", "terminal_states")
    if not all(hasattr(env, name) for name in required):
        raise TypeError(
            f"{type(env).__name__} has continuous dynamics and cannot be enumerated"
        )
    n_s = env.n_states
    n_a = env.action_spec.n
    p = np.zeros((n_s, n_a, n_s))
    r = np.zeros((n_s, n_a))
    h = np.zeros((n_s, n_a))
    terminal = np.zeros(n_s, dtype=bool)
    for t in env.terminal_states():
        terminal[t] = True
    for s in range(n_s):
        for a in range(n_a):
            if terminal[s]:
                p[s, a, s] = 1.0
                continue
            for prob, s_next, reward, heur in env.transitions(s, a):
                p[s, a, s_next] += prob
                r[s, a] += prob * reward
                h[s, a] += prob * heur
    return TabularMdp(
        p=p, r=r, h=h, gamma=env.gamma,
        start=env.initial_state_distribution(), terminal=terminal,
    )


def reward_table(mdp: TabularMdp, reward_select) -> np.ndarray:
    """Resolve a reward selector: 'task', 'heuristic', 'composed', or an (S, A) array."""
    if isinstance(reward_select, str):
        if reward_select == "task":
            return mdp.r
        if reward_select == "heuristic":
            return mdp.h
        if reward_select == "composed":
            return mdp.r + mdp.h
        raise ValueError(f"unknown reward selector {reward_select!r}")
    table = np.asarray(reward_select, dtype=float)
    if table.shape != mdp.r.shape:
        raise ValueError("custom reward table has wrong shape")
    return table


def _policy_matrix(mdp: TabularMdp, policy) -> np.ndarray:
    """Accept a deterministic action vector or an (S, A) stochastic matrix."""
    policy = np.asarray(policy)
    if policy.ndim == 1:
        mat = np.zeros((mdp.n_states, mdp.n_actions))
        mat[np.arange(mdp.n_states), policy.astype(int)] = 1.0
        return mat
    if policy.shape != (mdp.n_states, mdp.n_actions):
        raise ValueError("policy matrix has wrong shape")
    if not np.all(np.abs(policy.sum(axis=1) - 1.0) < 1e-9):
        raise ValueError("policy rows must sum to 1")
    return policy.astype(float)


def value_iteration(mdp: TabularMdp, reward_select="task", tol: float = 1e-10,
                    max_iter: int = 200_000) -> tuple[np.ndarray, np.ndarray]:
    """Optimal values and the greedy policy (ties -> lowest action index)."""
    rew = reward_table(mdp, reward_select)
    v = np.zeros(mdp.n_states)
    for _ in range(max_iter):
        q = rew + mdp.gamma * mdp.p @ v
        v_new = q.max(axis=1)
        if np.max(np.abs(v_new - v)) <= tol:
            v = v_new
            break
        v = v_new
    else:
        raise RuntimeError("value iteration did not converge")
    q = rew + mdp.gamma * mdp.p @ v
    greedy = q.argmax(axis=1)  # argmax returns the first (lowest) index on ties
    return v, greedy


def policy_evaluation(mdp: TabularMdp, policy, reward_select="task",
                      tol: float = 1e-12, max_iter: int = 400_000) -> np.ndarray:
    """Iterative evaluation of V^pi for a fixed policy."""
    mat = _policy_matrix(mdp, policy)
    rew = reward_table(mdp, reward_select)
    r_pi = (mat * rew).sum(axis=1)
    p_pi = np.einsum("sa,sat->st", mat, mdp.p)
    v = np.zeros(mdp.n_states)
    for _ in range(max_iter):
        v_new = r_pi + mdp.gamma * p_pi @ v
        if np.max(np.abs(v_new - v)) <= tol:
            return v_new
        v = v_new
    raise RuntimeError("policy evaluation did not converge")


def exact_q(mdp: TabularMdp, policy, reward_select="task") -> np.ndarray:
    rew = reward_table(mdp, reward_select)
    v = policy_evaluation(mdp, policy, reward_select)
    return rew + mdp.gamma * mdp.p @ v


def exact_advantage(mdp: TabularMdp, policy, reward_select="task") -> np.ndarray:
    """A^pi[s, a] = R[s, a] + gamma * E_{s'}[V^pi(s')] - V^pi(s)."""
    rew = reward_table(mdp, reward_select)
    v = policy_evaluation(mdp, policy, reward_select)
    return rew + mdp.gamma * mdp.p @ v - v[:, None]


def discounted_occupancy(mdp: TabularMdp, policy) -> np.ndarray:
    """d[s, a] = sum_t gamma^t P(s_t = s, a_t = a), by direct linear solve."""
    mat = _policy_matrix(mdp, policy)
    p_pi = np.einsum("sa,sat->st", mat, mdp.p)
    d_states = np.linalg.solve(
        np.eye(mdp.n_states) - mdp.gamma * p_pi.T, mdp.start
    )
    return d_states[:, None] * mat


def policy_return(mdp: TabularMdp, policy, reward_select="task") -> float:
    """Discounted return of a policy from the initial distribution."""
    v = policy_evaluation(mdp, policy, reward_select)
    return float(mdp.start @ v)
