"""Metric CSV round trips, run discovery, and evaluation statistics."""
import os

import numpy as np
import pytest

from hepo_lab.runio import (
    CSV_HEADER,
    discover_runs,
    final_returns,
    read_metrics_csv,
    render_metrics_csv,
    run_csv_path,
    write_metrics_csv,
)
from hepo_lab.stats import (
    DegenerateNormalization,
    MetricRecord,
    ScoreMatrix,
    bootstrap_ci,
    iqm,
    normalized_return,
    poi_bootstrap_ci,
    probability_of_improvement,
)


def rec(seed=0, iteration=0, j=0.0, h=0.0, alpha=0.0, sr=0.0, algo="hepo"):
    return MetricRecord(algorithm=algo, seed=seed, iteration=iteration,
                        env_steps=(iteration + 1) * 128, j_return=j,
                        h_return=h, alpha=alpha, success_rate=sr)


# ---------------------------------------------------------------- CSV files

def test_header_is_pinned():
    assert CSV_HEADER == ("algorithm,seed,iteration,env_steps,"
                          "J_return,H_return,alpha,success_rate")
    text = render_metrics_csv([rec()])
    assert text.startswith(CSV_HEADER + "\n")
    assert "\r" not in text


def test_awkward_floats_round_trip_exactly(tmp_path):
    records = [
        rec(iteration=0, j=0.1 + 0.2, h=1.0 / 3.0, alpha=1e-17, sr=0.875),
        rec(iteration=1, j=float(np.float64(0.7237589201)), h=-0.0,
            alpha=123456.789, sr=1.0),
    ]
    path = str(tmp_path / "0.csv")
    write_metrics_csv(path, records)
    back = read_metrics_csv(path)
    assert back == records


def test_render_is_deterministic():
    records = [rec(iteration=i, j=np.sin(i)) for i in range(5)]
    assert render_metrics_csv(records) == render_metrics_csv(records)


def test_reader_rejects_foreign_header(tmp_path):
    path = str(tmp_path / "0.csv")
    with open(path, "w") as fh:
        fh.write("algorithm,seed,ret\nhepo,0,1.0\n")
    with pytest.raises(ValueError):
        read_metrics_csv(path)


def test_discover_runs_scans_the_layout(tmp_path):
    exp = str(tmp_path / "exp")
    for label, seeds in (("hepo", (2, 10)), ("h_only", (0,))):
        os.makedirs(os.path.join(exp, label))
        for seed in seeds:
            write_metrics_csv(run_csv_path(exp, label, seed),
                              [rec(seed=seed, iteration=0, j=float(seed)),
                               rec(seed=seed, iteration=1, j=float(seed) + 0.5)])
    # clutter that discovery must skip
    with open(os.path.join(exp, "hepo", "config.ini"), "w") as fh:
        fh.write("[run]\n")
    with open(os.path.join(exp, "hepo", "summary.csv"), "w") as fh:
        fh.write("not a run file\n")
    with open(os.path.join(exp, "notes.txt"), "w") as fh:
        fh.write("scratch\n")

    runs = discover_runs(exp)
    assert set(runs) == {"hepo", "h_only"}
    assert set(runs["hepo"]) == {2, 10}
    finals = final_returns(runs["hepo"])
    assert np.array_equal(finals, [2.5, 10.5])   # ordered by seed
    assert np.array_equal(final_returns(runs["hepo"], "success_rate"), [0.0, 0.0])


def test_discover_runs_missing_directory(tmp_path):
    with pytest.raises(FileNotFoundError):
        discover_runs(str(tmp_path / "nope"))


# ------------------------------------------------------------- statistics

def test_iqm_of_one_to_hundred():
    assert iqm(np.arange(1, 101)) == pytest.approx(50.5)


def test_iqm_trims_extremes():
    assert iqm([0.0, 0.0, 0.0, 1000.0]) == 0.0
    assert iqm([5.0]) == 5.0
    with pytest.raises(ValueError):
        iqm([])


def test_normalized_return_unit_values():
    assert normalized_return(0.8, 0.8, 0.1) == pytest.approx(1.0)
    assert normalized_return(0.1, 0.8, 0.1) == pytest.approx(0.0)
    assert normalized_return(0.45, 0.8, 0.1) == pytest.approx(0.5)
    assert normalized_return(0.9, 0.8, 0.1) > 1.0
    with pytest.raises(DegenerateNormalization):
        normalized_return(0.5, 0.3, 0.3)


def test_probability_of_improvement_values():
    x = np.array([1.0, 2.0, 3.0])
    assert probability_of_improvement(x, x) == 0.5
    assert probability_of_improvement([2.0, 3.0], [0.0, 1.0]) == 1.0
    assert probability_of_improvement([1.0, 2.0], [1.5]) == 0.5
    assert probability_of_improvement([1.0], [1.0]) == 0.5
    with pytest.raises(ValueError):
        probability_of_improvement([], [1.0])


def test_bootstrap_ci_is_deterministic_and_brackets_the_iqm():
    rng = np.random.default_rng(0)
    scores = rng.normal(loc=0.7, scale=0.1, size=40)
    lo1, hi1 = bootstrap_ci(scores, resamples=500, seed=3)
    lo2, hi2 = bootstrap_ci(scores, resamples=500, seed=3)
    assert (lo1, hi1) == (lo2, hi2)
    point = iqm(scores)
    assert lo1 < point < hi1
    assert hi1 - lo1 < 0.2


def test_bootstrap_ci_accepts_stratified_groups_and_custom_statistic():
    groups = [np.full(10, 0.2), np.full(10, 0.8)]
    lo, hi = bootstrap_ci(groups, resamples=200, statistic=np.mean)
    # within-group resampling of constant groups always pools to mean 0.5
    assert lo == pytest.approx(0.5)
    assert hi == pytest.approx(0.5)


def test_poi_bootstrap_ci_behavior():
    rng = np.random.default_rng(1)
    strong = rng.normal(10.0, 0.5, size=12)
    weak = rng.normal(0.0, 0.5, size=12)
    lo, hi = poi_bootstrap_ci(strong, weak, resamples=400, seed=0)
    assert (lo, hi) == poi_bootstrap_ci(strong, weak, resamples=400, seed=0)
    assert 0.0 <= lo <= hi <= 1.0
    assert lo > 0.9
    tied = np.full(6, 0.3)
    lo_t, hi_t = poi_bootstrap_ci(tied, tied, resamples=100)
    assert lo_t == pytest.approx(0.5)
    assert hi_t == pytest.approx(0.5)


def test_score_matrix_pooling_and_validation():
    mat = ScoreMatrix(
        task_names=("chain", "grid"),
        scores={"hepo": np.array([[1.0, 0.9], [0.8, 1.1]])},
    )
    assert np.array_equal(mat.pooled("hepo"), [1.0, 0.9, 0.8, 1.1])
    with pytest.raises(ValueError):
        ScoreMatrix(task_names=("chain",),
                    scores={"hepo": np.array([[1.0, 0.9]])})
    with pytest.raises(ValueError):
        ScoreMatrix(task_names=("chain",),
                    scores={"hepo": np.array([[np.nan]])})
