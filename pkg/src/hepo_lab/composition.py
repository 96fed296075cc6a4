"""Per-step reward compositions for the single-policy baselines.

Five kinds: task only, heuristic only, weighted sum, potential-based
shaping using the heuristic value as the potential (terminal potential 0,
which keeps the shaped objective's optimal policy aligned with the task),
and an annealed shaping whose heuristic influence fades with training
iteration via a schedule on beta.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("j_only", "h_only", "j_plus_h", "pbrs", "hurl")
HURL_SHAPES = ("linear", "exponential")


@dataclass(frozen=True)
class HurlSchedule:
    beta0: float = 0.3
    beta_final: float = 1.0
    horizon: int = 100
    shape: str = "linear"

    def __post_init__(self):
        for b in (self.beta0, self.beta_final):
            if not 0.0 <= b <= 1.0:
                raise ValueError("beta values must lie in [0, 1]")
        if self.beta_final < self.beta0:
            raise ValueError("schedule must be non-decreasing")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.shape not in HURL_SHAPES:
            raise ValueError(f"unknown schedule shape {self.shape!r}")


def hurl_beta(schedule: HurlSchedule, iteration: int) -> float:
    """beta_i: non-decreasing from beta0 to beta_final, clamped to [0, 1]."""
    if iteration < 0:
        raise ValueError("iteration must be >= 0")
    if iteration >= schedule.horizon:
        return schedule.beta_final
    frac = iteration / schedule.horizon
    if schedule.shape == "linear":
        beta = schedule.beta0 + (schedule.beta_final - schedule.beta0) * frac
    else:
        # exponential approach toward beta_final, reaching it at the horizon
        gap = schedule.beta_final - schedule.beta0
        beta = schedule.beta_final - gap * (1.0 - frac) ** 2
    return float(min(1.0, max(0.0, beta)))


@dataclass(frozen=True)
class CompositionSpec:
    kind: str
    lam: float = 1.0
    hurl: HurlSchedule = HurlSchedule()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown composition kind {self.kind!r}")
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValueError("lambda must be finite and >= 0")


def compose(spec: CompositionSpec, r: np.ndarray, h: np.ndarray,
            h_next: np.ndarray, gamma: float, iteration: int) -> np.ndarray:
    """Training reward per step.  `h_next` is the next step's heuristic
    value within the same episode; episode boundaries supply 0."""
    r = np.asarray(r, dtype=float)
    h = np.asarray(h, dtype=float)
    h_next = np.asarray(h_next, dtype=float)
    if spec.kind == "j_only":
        return r.copy()
    if spec.kind == "h_only":
        return h.copy()
    if spec.kind == "j_plus_h":
        return r + spec.lam * h
    if spec.kind == "pbrs":
        return r + gamma * h_next - h
    beta = hurl_beta(spec.hurl, iteration)
    return r + (1.0 - beta) * gamma * h_next


def shifted_next_heuristic(h: np.ndarray, done: np.ndarray) -> np.ndarray:
    """h_{t+1} within each episode of one time-ordered stream; 0 at ends."""
    h_next = np.zeros_like(h, dtype=float)
    if len(h) > 1:
        h_next[:-1] = h[1:]
    h_next[np.asarray(done, dtype=bool)] = 0.0
    return h_next
