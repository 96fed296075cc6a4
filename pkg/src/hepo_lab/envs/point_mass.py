"""Continuous 2-D point mass with bounded acceleration actions.

State is (position, velocity) in [-1, 1]^2 each; the action is an
acceleration in [-1, 1]^2, integrated with a small time step.  The task
reward is 1 inside the goal radius (terminating); the heuristic reward is
the dense negative Euclidean distance of the landing position to the
goal.  This env exists to exercise the diagonal-Gaussian policy path;
it has no tabular representation.
"""
from __future__ import annotations

import numpy as np

from ..rollout import ActionSpec, EnvBase, Observation, StepOutcome

DT = 0.1


class PointMass(EnvBase):
    def __init__(self, goal: tuple[float, float] = (0.7, 0.7),
                 goal_radius: float = 0.2, max_episode_steps: int = 120,
                 start_low: tuple[float, float] = (-0.9, -0.9),
                 start_high: tuple[float, float] = (-0.6, -0.6)):
        if goal_radius <= 0:
            raise ValueError("goal radius must be positive")
        self.goal = np.asarray(goal, dtype=float)
        self.goal_radius = float(goal_radius)
        self.max_episode_steps = int(max_episode_steps)
        self.start_low = np.asarray(start_low, dtype=float)
        self.start_high = np.asarray(start_high, dtype=float)
        self.observation_dim = 4
        self.action_spec = ActionSpec(low=-np.ones(2), high=np.ones(2))
        self._pos = np.zeros(2)
        self._vel = np.zeros(2)
        self._steps = 0
        self._running = False

    def _observe(self) -> Observation:
        return Observation(features=np.concatenate([self._pos, self._vel]))

    def reset(self, rng: np.random.Generator) -> Observation:
        self._pos = rng.uniform(self.start_low, self.start_high)
        self._vel = np.zeros(2)
        self._steps = 0
        self._running = True
        return self._observe()

    def step(self, action, rng: np.random.Generator) -> StepOutcome:
        if not self._running:
            raise RuntimeError("step() called on a finished episode; reset first")
        a = np.clip(np.asarray(action, dtype=float), -1.0, 1.0)
        self._vel = np.clip(self._vel + DT * a, -1.0, 1.0)
        self._pos = np.clip(self._pos + DT * self._vel, -1.0, 1.0)
        dist = float(np.linalg.norm(self._pos - self.goal))
        terminated = dist <= self.goal_radius
        reward = 1.0 if terminated else 0.0
        self._steps += 1
        truncated = (not terminated) and self._steps >= self.max_episode_steps
        if terminated or truncated:
            self._running = False
        return StepOutcome(
            observation=self._observe(),
            task_reward=reward,
            heuristic_reward=-dist,
            terminated=terminated,
            truncated=truncated,
        )
