"""Sparse chain: states 0..N on a line, task reward 1 on entering state N.

The agent starts at 0 and can move left or right (left clamps at 0).
Entering state N terminates the episode.  With the reward granted on the
entry step, the optimal discounted return from the start is gamma**(N-1).
A step cap of 4*N truncates wandering episodes.
"""
from __future__ import annotations

import numpy as np

from ..rollout import ActionSpec, EnvBase, Observation, StepOutcome
from .heuristics import HeuristicSpec

LEFT, RIGHT = 0, 1


class SparseChain(EnvBase):
    def __init__(self, n: int, heuristic: str = "potential_shaping",
                 gamma: float = 0.99, max_episode_steps: int | None = None,
                 trap_states: tuple[int, ...] | None = None,
                 trap_bonus: float = 0.05, penalty_weight: float = 5.0):
        if n < 2:
            raise ValueError("chain length must be at least 2")
        self.n = n
        self.gamma = gamma
        self.heuristic = HeuristicSpec(heuristic, gamma, penalty_weight, trap_bonus)
        self.max_episode_steps = 4 * n if max_episode_steps is None else max_episode_steps
        if trap_states is None:
            trap_states = (n - 1,)
        self.trap_states = frozenset(int(s) for s in trap_states)
        if n in self.trap_states:
            raise ValueError("trap region must not contain the goal state")
        self.n_states = n + 1
        self.observation_dim = self.n_states
        self.action_spec = ActionSpec(n=2)
        self._state = 0
        self._steps = 0
        self._running = False

    # -- heuristic plumbing -------------------------------------------------
    def _phi(self, s: int) -> float:
        return 1.0 - (self.n - s) / self.n

    def _h(self, s: int, s_next: int) -> float:
        return self.heuristic.reward(
            phi_s=self._phi(s),
            phi_next=self._phi(s_next),
            dist_frac_next=(self.n - s_next) / self.n,
            action_cost=1.0,
            next_in_trap=s_next in self.trap_states,
        )

    def _observe(self, s: int) -> Observation:
        feats = np.zeros(self.n_states)
        feats[s] = 1.0
        return Observation(features=feats, state_index=s)

    # -- episodic interface -------------------------------------------------
    def reset(self, rng: np.random.Generator) -> Observation:
        self._state = 0
        self._steps = 0
        self._running = True
        return self._observe(0)

    def step(self, action, rng: np.random.Generator) -> StepOutcome:
        if not self._running:
            raise RuntimeError("step() called on a finished episode; reset first")
        a = int(action)
        s = self._state
        s_next = min(self.n, s + 1) if a == RIGHT else max(0, s - 1)
        reward = 1.0 if (s_next == self.n and s != self.n) else 0.0
        terminated = s_next == self.n
        self._steps += 1
        truncated = (not terminated) and self._steps >= self.max_episode_steps
        self._state = s_next
        if terminated or truncated:
            self._running = False
        return StepOutcome(
            observation=self._observe(s_next),
            task_reward=reward,
            heuristic_reward=self._h(s, s_next),
            terminated=terminated,
            truncated=truncated,
        )

    # -- exact enumeration (for the tabular oracle) --------------------------
    def initial_state_distribution(self) -> np.ndarray:
        mu = np.zeros(self.n_states)
        mu[0] = 1.0
        return mu

    def terminal_states(self) -> frozenset[int]:
        return frozenset({self.n})

    def transitions(self, s: int, a: int) -> list[tuple[float, int, float, float]]:
        """All (prob, s_next, task_reward, heuristic_reward) outcomes of (s, a)."""
        s_next = min(self.n, s + 1) if a == RIGHT else max(0, s - 1)
        reward = 1.0 if s_next == self.n else 0.0
        return [(1.0, s_next, reward, self._h(s, s_next))]
