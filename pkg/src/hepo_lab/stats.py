"""Evaluation statistics: normalized returns, interquartile means with
stratified bootstrap confidence intervals, and probability of improvement.

Scores are normalized against two reference levels, the heuristic-only
policy (mapped to 1) and a uniform-random policy (mapped to 0).  The IQM
discards the bottom and top floor(n/4) scores and averages the rest.
Probability of improvement counts strict wins over all cross pairs, with
ties worth half a win, so PoI(X, X) = 0.5 exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rollout import STREAM_BOOTSTRAP, RngStream


@dataclass(frozen=True)
class MetricRecord:
    algorithm: str
    seed: int
    iteration: int
    env_steps: int
    j_return: float
    h_return: float
    alpha: float
    success_rate: float


class DegenerateNormalization(ValueError):
    """Reference returns too close to normalize against."""


def normalized_return(j_x: float, j_h_only: float, j_random: float) -> float:
    if abs(j_h_only - j_random) < 1e-9:
        raise DegenerateNormalization(
            f"reference gap |{j_h_only} - {j_random}| below 1e-9")
    return (j_x - j_random) / (j_h_only - j_random)


def iqm(scores) -> float:
    """Mean of the middle half: floor(n/4) scores trimmed from each side."""
    scores = np.sort(np.asarray(scores, dtype=float))
    if scores.size == 0:
        raise ValueError("iqm of an empty score list")
    trim = scores.size // 4
    kept = scores[trim:scores.size - trim]
    return float(kept.mean())


def _as_groups(scores) -> list[np.ndarray]:
    if isinstance(scores, (list, tuple)) and scores and \
            isinstance(scores[0], (list, tuple, np.ndarray)):
        return [np.asarray(g, dtype=float) for g in scores]
    return [np.asarray(scores, dtype=float)]


def bootstrap_ci(scores, resamples: int = 2000, level: float = 0.95,
                 seed: int = 0, statistic=iqm) -> tuple[float, float]:
    """Percentile bootstrap interval for a statistic of pooled scores.

    `scores` may be a flat array or a list of per-task arrays; resampling
    is stratified within each task group.  Deterministic for a fixed seed.
    """
    groups = _as_groups(scores)
    rng = RngStream(seed, STREAM_BOOTSTRAP).generator()
    values = np.empty(resamples)
    for i in range(resamples):
        pooled = np.concatenate([
            g[rng.integers(0, g.size, size=g.size)] for g in groups
        ])
        values[i] = statistic(pooled)
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(values, [tail, 1.0 - tail])
    return float(lo), float(hi)


def probability_of_improvement(scores_x, scores_y) -> float:
    """Fraction of cross pairs with x > y; ties count 0.5."""
    x = np.asarray(scores_x, dtype=float)
    y = np.asarray(scores_y, dtype=float)
    if x.size == 0 or y.size == 0:
        raise ValueError("probability of improvement needs non-empty scores")
    diffs = x[:, None] - y[None, :]
    wins = (diffs > 0).sum() + 0.5 * (diffs == 0).sum()
    return float(wins / diffs.size)


def poi_bootstrap_ci(scores_x, scores_y, resamples: int = 2000,
                     level: float = 0.95, seed: int = 0) -> tuple[float, float]:
    """Percentile bootstrap interval for probability of improvement.

    Both run sets are resampled independently with replacement each
    iteration, so the interval reflects run-to-run variation on both sides.
    """
    x = np.asarray(scores_x, dtype=float)
    y = np.asarray(scores_y, dtype=float)
    rng = RngStream(seed, STREAM_BOOTSTRAP, member=1).generator()
    values = np.empty(resamples)
    for i in range(resamples):
        xs = x[rng.integers(0, x.size, size=x.size)]
        ys = y[rng.integers(0, y.size, size=y.size)]
        values[i] = probability_of_improvement(xs, ys)
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(values, [tail, 1.0 - tail])
    return float(lo), float(hi)


@dataclass(frozen=True)
class ScoreMatrix:
    """Final normalized scores per algorithm: a (runs, tasks) array each."""

    task_names: tuple[str, ...]
    scores: dict[str, np.ndarray]

    def __post_init__(self):
        n_tasks = len(self.task_names)
        for name, mat in self.scores.items():
            if mat.ndim != 2 or mat.shape[1] != n_tasks:
                raise ValueError(f"score matrix for {name!r} has wrong shape")
            if not np.all(np.isfinite(mat)):
                raise ValueError(f"score matrix for {name!r} has non-finite entries")

    def pooled(self, algorithm: str) -> np.ndarray:
        return self.scores[algorithm].reshape(-1)
