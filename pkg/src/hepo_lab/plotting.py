"""Learning-curve figures rendered from the metric CSVs.

One vector-graphics file per metric: each algorithm's across-seed mean
per iteration with a bootstrap confidence band.  The CSVs remain the
source of truth; `curve_data` returns exactly the arrays that get drawn
so tests can compare them against the files.
"""
from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .stats import MetricRecord, bootstrap_ci

METRICS = ("j_return", "h_return", "alpha", "success_rate")
_LABELS = {
    "j_return": "task return",
    "h_return": "heuristic return",
    "alpha": "constraint multiplier",
    "success_rate": "success rate",
}


def curve_data(seed_runs: dict[int, list[MetricRecord]], metric: str,
               resamples: int = 400):
    """(env_steps, mean, lo, hi) arrays across seeds for one algorithm."""
    seeds = sorted(seed_runs)
    series = np.array([[getattr(r, metric) for r in seed_runs[s]] for s in seeds])
    steps = np.array([r.env_steps for r in seed_runs[seeds[0]]])
    if any(len(seed_runs[s]) != len(steps) for s in seeds):
        raise ValueError("runs disagree on iteration count")
    mean = series.mean(axis=0)
    if series.shape[0] == 1:
        lo = hi = mean.copy()
    else:
        lo = np.empty_like(mean)
        hi = np.empty_like(mean)
        for t in range(series.shape[1]):
            lo[t], hi[t] = bootstrap_ci(series[:, t], resamples=resamples,
                                        statistic=lambda x: float(np.mean(x)))
    return steps, mean, lo, hi


def plot_metric(runs: dict[str, dict[int, list[MetricRecord]]], metric: str,
                out_path: str) -> dict[str, tuple]:
    """Write one SVG for `metric`; returns the plotted arrays per algorithm."""
    fig, ax = plt.subplots(figsize=(6.5, 4.2))
    drawn = {}
    for label in sorted(runs):
        steps, mean, lo, hi = curve_data(runs[label], metric)
        ax.plot(steps, mean, label=label, linewidth=1.6)
        ax.fill_between(steps, lo, hi, alpha=0.18)
        drawn[label] = (steps, mean, lo, hi)
    ax.set_xlabel("environment steps")
    ax.set_ylabel(_LABELS.get(metric, metric))
    ax.legend(fontsize=8)
    ax.grid(alpha=0.25)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return drawn


def plot_all(runs: dict[str, dict[int, list[MetricRecord]]],
             report_dir: str) -> list[str]:
    if not runs:
        raise ValueError("no runs found to plot")
    os.makedirs(report_dir, exist_ok=True)
    written = []
    for metric in METRICS:
        path = os.path.join(report_dir, f"curve_{metric}.svg")
        plot_metric(runs, metric, path)
        written.append(path)
    return written
