"""Grid world with a single goal cell, dual rewards, and optional slip.

The agent moves on a width x height grid with four actions (up, down,
left, right); moves off the edge clamp in place.  Entering the goal cell
pays task reward 1 and terminates.  With slip probability p, the executed
move is resampled uniformly over the four directions, which keeps the
dynamics exactly enumerable for the tabular oracle.

Episodes truncate after 4*(width+height) steps unless configured
otherwise.  Heuristic families are defined over Manhattan distance to the
goal; the trap region defaults to the two cells adjacent to the goal so a
camped policy occasionally slips into the goal rather than never finishing.
"""
from __future__ import annotations

import numpy as np

from ..rollout import ActionSpec, EnvBase, Observation, StepOutcome
from .heuristics import HeuristicSpec

# action index -> (dx, dy)
MOVES = ((0, 1), (0, -1), (-1, 0), (1, 0))


class GridGoal(EnvBase):
    def __init__(self, width: int, height: int,
                 start: tuple[int, int] = (0, 0),
                 goal: tuple[int, int] | None = None,
                 heuristic: str = "potential_shaping",
                 gamma: float = 0.99, slip_prob: float = 0.0,
                 max_episode_steps: int | None = None,
                 trap_cells: tuple[tuple[int, int], ...] | None = None,
                 trap_bonus: float = 0.05, penalty_weight: float = 5.0):
        if width < 2 or height < 2:
            raise ValueError("grid must be at least 2x2")
        if not 0.0 <= slip_prob <= 1.0:
            raise ValueError("slip_prob must lie in [0, 1]")
        self.width = width
        self.height = height
        self.goal = (width - 1, height - 1) if goal is None else tuple(goal)
        self.start = tuple(start)
        for name, cell in (("start", self.start), ("goal", self.goal)):
            if not self._in_bounds(cell):
                raise ValueError(f"{name} cell {cell} outside the grid")
        if self.start == self.goal:
            raise ValueError("start and goal must differ")
        self.gamma = gamma
        self.slip_prob = float(slip_prob)
        self.heuristic = HeuristicSpec(heuristic, gamma, penalty_weight, trap_bonus)
        self.max_episode_steps = (
            4 * (width + height) if max_episode_steps is None else max_episode_steps
        )
        if trap_cells is None:
            gx, gy = self.goal
            candidates = [(gx - 1, gy), (gx, gy - 1)]
            trap_cells = tuple(c for c in candidates if self._in_bounds(c))
        self.trap_cells = frozenset(tuple(c) for c in trap_cells)
        if self.goal in self.trap_cells:
            raise ValueError("trap region must be disjoint from the goal")
        for c in self.trap_cells:
            if not self._in_bounds(c):
                raise ValueError(f"trap cell {c} outside the grid")

        self.n_states = width * height
        self.observation_dim = self.n_states
        self.action_spec = ActionSpec(n=4)
        self._d_max = max(
            self._dist((x, y)) for x in range(width) for y in range(height)
        )
        self._cell = self.start
        self._steps = 0
        self._running = False

    # -- geometry ------------------------------------------------------------
    def _in_bounds(self, cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def _dist(self, cell) -> int:
        return abs(cell[0] - self.goal[0]) + abs(cell[1] - self.goal[1])

    def _index(self, cell) -> int:
        return cell[1] * self.width + cell[0]

    def _move(self, cell, action: int):
        dx, dy = MOVES[action]
        nx = min(self.width - 1, max(0, cell[0] + dx))
        ny = min(self.height - 1, max(0, cell[1] + dy))
        return (nx, ny)

    def _phi(self, cell) -> float:
        return 1.0 - self._dist(cell) / self._d_max

    def _h(self, cell, cell_next) -> float:
        return self.heuristic.reward(
            phi_s=self._phi(cell),
            phi_next=self._phi(cell_next),
            dist_frac_next=self._dist(cell_next) / self._d_max,
            action_cost=1.0,
            next_in_trap=cell_next in self.trap_cells,
        )

    def _observe(self, cell) -> Observation:
        feats = np.zeros(self.n_states)
        feats[self._index(cell)] = 1.0
        return Observation(features=feats, state_index=self._index(cell))

    # -- episodic interface ----------------------------------------------------
    def reset(self, rng: np.random.Generator) -> Observation:
        self._cell = self.start
        self._steps = 0
        self._running = True
        return self._observe(self._cell)

    def step(self, action, rng: np.random.Generator) -> StepOutcome:
        if not self._running:
            raise RuntimeError("step() called on a finished episode; reset first")
        a = int(action)
        if self.slip_prob > 0.0 and rng.random() < self.slip_prob:
            a = int(rng.integers(4))
        cell = self._cell
        cell_next = self._move(cell, a)
        terminated = cell_next == self.goal
        reward = 1.0 if terminated else 0.0
        self._steps += 1
        truncated = (not terminated) and self._steps >= self.max_episode_steps
        self._cell = cell_next
        if terminated or truncated:
            self._running = False
        return StepOutcome(
            observation=self._observe(cell_next),
            task_reward=reward,
            heuristic_reward=self._h(cell, cell_next),
            terminated=terminated,
            truncated=truncated,
        )

    # -- exact enumeration (for the tabular oracle) ------------------------------
    def initial_state_distribution(self) -> np.ndarray:
        mu = np.zeros(self.n_states)
        mu[self._index(self.start)] = 1.0
        return mu

    def terminal_states(self) -> frozenset[int]:
        return frozenset({self._index(self.goal)})

    def transitions(self, s: int, a: int) -> list[tuple[float, int, float, float]]:
        """All (prob, s_next, task_reward, heuristic_reward) outcomes of (s, a)."""
        cell = (s % self.width, s // self.width)
        probs: dict[int, float] = {}
        base = 1.0 - self.slip_prob
        if base > 0.0:
            probs[a] = base
        for other in range(4):
            if self.slip_prob > 0.0:
                probs[other] = probs.get(other, 0.0) + self.slip_prob / 4.0
        out = []
        for act, p in sorted(probs.items()):
            cell_next = self._move(cell, act)
            reward = 1.0 if cell_next == self.goal else 0.0
            out.append((p, self._index(cell_next), reward, self._h(cell, cell_next)))
        return out
