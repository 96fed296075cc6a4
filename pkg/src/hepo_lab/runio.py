"""Metric CSV files and experiment directory layout.

One CSV per (algorithm, seed) at ``<out>/<experiment>/<algorithm>/<seed>.csv``.
Floats are written with `repr`, which round-trips exactly and uses a
decimal point with no separators; lines end with a single line feed, so a
rerun of the same config produces a byte-identical file.
"""
from __future__ import annotations

import csv
import io
import os

import numpy as np

from .nets import Policy
from .stats import MetricRecord

CSV_HEADER = "algorithm,seed,iteration,env_steps,J_return,H_return,alpha,success_rate"


def render_metrics_csv(records: list[MetricRecord]) -> str:
    out = io.StringIO()
    out.write(CSV_HEADER + "\n")
    for rec in records:
        out.write(",".join([
            rec.algorithm,
            str(rec.seed),
            str(rec.iteration),
            str(rec.env_steps),
            repr(float(rec.j_return)),
            repr(float(rec.h_return)),
            repr(float(rec.alpha)),
            repr(float(rec.success_rate)),
        ]) + "\n")
    return out.getvalue()


def write_metrics_csv(path: str, records: list[MetricRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render_metrics_csv(records))


def read_metrics_csv(path: str) -> list[MetricRecord]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if ",".join(header) != CSV_HEADER:
            raise ValueError(f"unexpected CSV header in {path}")
        records = []
        for row in reader:
            records.append(MetricRecord(
                algorithm=row[0], seed=int(row[1]), iteration=int(row[2]),
                env_steps=int(row[3]), j_return=float(row[4]),
                h_return=float(row[5]), alpha=float(row[6]),
                success_rate=float(row[7]),
            ))
    return records


def run_csv_path(exp_dir: str, label: str, seed: int) -> str:
    return os.path.join(exp_dir, label, f"{seed}.csv")


def discover_runs(exp_dir: str) -> dict[str, dict[int, list[MetricRecord]]]:
    """Map algorithm label -> seed -> records, scanning the layout."""
    runs: dict[str, dict[int, list[MetricRecord]]] = {}
    if not os.path.isdir(exp_dir):
        raise FileNotFoundError(f"no experiment directory at {exp_dir}")
    for label in sorted(os.listdir(exp_dir)):
        algo_dir = os.path.join(exp_dir, label)
        if not os.path.isdir(algo_dir):
            continue
        for fname in sorted(os.listdir(algo_dir)):
            if not fname.endswith(".csv"):
                continue
            stem = fname[:-4]
            if not stem.lstrip("-").isdigit():
                continue
            records = read_metrics_csv(os.path.join(algo_dir, fname))
            runs.setdefault(label, {})[int(stem)] = records
    return {label: seeds for label, seeds in runs.items() if seeds}


def final_returns(runs_for_label: dict[int, list[MetricRecord]],
                  attr: str = "j_return") -> np.ndarray:
    """Per-seed final value of one metric, ordered by seed."""
    return np.array([
        getattr(records[-1], attr) for _, records in sorted(runs_for_label.items())
    ])


def save_policy(path: str, policy: Policy) -> None:
    arrays = {name: policy.params.view(name) for name in policy.params.slots}
    meta = dict(
        kind=policy.kind,
        input_dim=policy.spec.input_dim,
        hidden=",".join(str(h) for h in policy.spec.hidden),
        output_dim=policy.spec.output_dim,
        activation=policy.spec.activation,
    )
    np.savez(path, _meta=np.array([repr(meta)]), **arrays)
