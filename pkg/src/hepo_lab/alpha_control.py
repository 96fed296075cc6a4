"""Controller for the constraint multiplier alpha.

Per iteration it receives a scalar gradient estimate

    g = mean(companion task advantage over the trained policy's buffer)
      - mean(trained policy's task advantage over the companion's buffer),

a two-sided estimate of how far the trained policy is ahead of the
companion on the task.  The raw estimates go into a ring buffer of the
last `window` records; the update uses their median, so a single outlier
record cannot flip the direction.  The median gradient feeds a
second-moment-normalized Adam step (the first-moment average is disabled:
the update direction must always match the current median's sign), the
step is clipped to (-delta_clip, +delta_clip), and alpha is projected
back to [0, inf).  Positive g (policy ahead) drives alpha down; negative
g drives it up, increasing the task-reward weight.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class AlphaConfig:
    alpha_init: float = 0.0
    step_size: float = 0.01
    delta_clip: float = 1.0
    window: int = 8
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.alpha_init < 0:
            raise ValueError("alpha must start in [0, inf)")
        if self.step_size <= 0 or self.delta_clip <= 0 or self.window < 1:
            raise ValueError("step size, clip bound, and window must be positive")


@dataclass
class AlphaState:
    alpha: float
    records: deque = field(default_factory=lambda: deque(maxlen=8))
    second_moment: float = 0.0
    step_count: int = 0

    @classmethod
    def create(cls, config: AlphaConfig) -> "AlphaState":
        return cls(alpha=config.alpha_init,
                   records=deque(maxlen=config.window))


def estimate_gradient(cross_ref_task_on_pi: np.ndarray,
                      cross_pi_task_on_ref: np.ndarray) -> float:
    """Two-sided constraint-gap estimate from raw (unstandardized) advantages."""
    a = np.asarray(cross_ref_task_on_pi, dtype=float)
    b = np.asarray(cross_pi_task_on_ref, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("gradient estimation needs both advantage arrays")
    return float(a.mean() - b.mean())


def update_alpha(state: AlphaState, g: float, config: AlphaConfig) -> float:
    """Push one gradient record and apply a clipped, projected step.

    Returns the signed step delta (before projection) for diagnostics.
    """
    if not np.isfinite(g):
        raise ValueError("gradient estimate must be finite")
    state.records.append(float(g))
    smoothed = float(np.median(state.records))
    state.step_count += 1
    state.second_moment = (config.beta2 * state.second_moment
                           + (1.0 - config.beta2) * smoothed * smoothed)
    v_hat = state.second_moment / (1.0 - config.beta2 ** state.step_count)
    delta = config.step_size * smoothed / (np.sqrt(v_hat) + config.eps)
    delta = float(np.clip(delta, -config.delta_clip, config.delta_clip))
    state.alpha = max(0.0, state.alpha - delta)
    return delta
