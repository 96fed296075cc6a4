"""Heuristic reward families shared by the discrete goal-reaching envs.

Each family maps a transition (s, a, s') to a scalar heuristic reward,
expressed through the env-provided quantities: the goal-progress
potential phi(s) = 1 - d(s)/d_max (1 at the goal, 0 at the farthest
cell), the normalized distance of the landing state, the per-step action
magnitude, and whether the landing state lies in a designated trap
region.

Families:
  potential_shaping    gamma*phi(s') - phi(s); a well-shaped dense signal.
  wrong_sign_distance  +d(s')/d_max; rewards moving AWAY from the goal.
  action_penalty       shaping minus a heavily overweighted action cost.
  trap_lure            shaping plus a bonus for sitting in the trap region,
                       so the heuristic-optimal behavior camps instead of
                       finishing the task.
"""
from __future__ import annotations

from dataclasses import dataclass

FAMILIES = (
    "potential_shaping",
    "wrong_sign_distance",
    "action_penalty",
    "trap_lure",
)


@dataclass(frozen=True)
class HeuristicSpec:
    family: str
    gamma: float
    penalty_weight: float = 5.0
    trap_bonus: float = 0.05

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(
                f"unknown heuristic family {self.family!r}; expected one of {FAMILIES}"
            )

    def reward(self, phi_s: float, phi_next: float, dist_frac_next: float,
               action_cost: float, next_in_trap: bool) -> float:
        shaping = self.gamma * phi_next - phi_s
        if self.family == "potential_shaping":
            return shaping
        if self.family == "wrong_sign_distance":
            return dist_frac_next
        if self.family == "action_penalty":
            return shaping - self.penalty_weight * action_cost
        # trap_lure
        return shaping + (self.trap_bonus if next_in_trap else 0.0)
