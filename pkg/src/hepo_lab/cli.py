"""Command-line front end.

Subcommands:
  train    run the configured algorithm for each seed, writing one CSV per
           (algorithm, seed) plus final policy weights and the materialized
           config;
  compare  aggregate an experiment directory into normalized scores, IQM
           with bootstrap confidence intervals, and probability of
           improvement against a baseline;
  stats    print raw (unnormalized) per-algorithm summaries;
  plot     render learning-curve SVG files;
  oracle   run the identity check suites.

`HEPO_LAB_SEED` overrides the config seed list; an explicit `--seeds`
flag overrides both.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config, parse_config, \
    replace, to_ini
from .oracles import ALL_CHECKS, run_checks
from .plotting import plot_all
from .runio import (
    CSV_HEADER,
    discover_runs,
    final_returns,
    run_csv_path,
    save_policy,
    write_metrics_csv,
)
from .stats import (
    DegenerateNormalization,
    bootstrap_ci,
    iqm,
    normalized_return,
    probability_of_improvement,
)
from .training import random_reference_records, run_training

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2


def _parse_seed_list(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(",") if part.strip())


def _resolve_seeds(cfg: ExperimentConfig, flag_value: str | None) -> tuple[int, ...]:
    if flag_value:
        return _parse_seed_list(flag_value)
    env_value = os.environ.get("HEPO_LAB_SEED")
    if env_value:
        return _parse_seed_list(env_value)
    return cfg.seeds


def _train_one(cfg_text: str, seed: int, exp_dir: str) -> str:
    cfg = parse_config(cfg_text)
    state = run_training(cfg, seed, progress=_progress_printer(cfg, seed))
    label_dir = os.path.join(exp_dir, cfg.label)
    os.makedirs(label_dir, exist_ok=True)
    csv_path = run_csv_path(exp_dir, cfg.label, seed)
    write_metrics_csv(csv_path, state.records)
    save_policy(os.path.join(label_dir, f"{seed}_policy.npz"), state.pi.policy)
    if state.ref is not None:
        save_policy(os.path.join(label_dir, f"{seed}_companion.npz"),
                    state.ref.policy)
    return csv_path


def _progress_printer(cfg: ExperimentConfig, seed: int):
    def emit(record) -> None:
        print(
            f"train {cfg.label} seed={seed} "
            f"iter={record.iteration}/{cfg.iterations} "
            f"steps={record.env_steps} J={record.j_return:.4f} "
            f"H={record.h_return:.4f} alpha={record.alpha:.4f} "
            f"success={record.success_rate:.3f}",
            flush=True,
        )

    return emit


def cmd_train(args) -> int:
    try:
        cfg = load_config(args.config)
        seeds = _resolve_seeds(cfg, args.seeds)
        cfg = replace(cfg, seeds=seeds,
                      out_dir=args.out if args.out else cfg.out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    exp_dir = os.path.join(cfg.out_dir, cfg.name)
    label_dir = os.path.join(exp_dir, cfg.label)
    os.makedirs(label_dir, exist_ok=True)
    with open(os.path.join(label_dir, "config.ini"), "w", encoding="utf-8",
              newline="") as fh:
        fh.write(to_ini(cfg))

    cfg_text = to_ini(cfg)
    if args.jobs > 1 and len(cfg.seeds) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(_train_one, cfg_text, seed, exp_dir)
                       for seed in cfg.seeds]
            for fut in futures:
                fut.result()
    else:
        for seed in cfg.seeds:
            _train_one(cfg_text, seed, exp_dir)
    print(f"wrote {len(cfg.seeds)} runs under {exp_dir}/{cfg.label}/")
    return EXIT_OK


def _find_experiment_config(exp_dir: str) -> ExperimentConfig | None:
    for label in sorted(os.listdir(exp_dir)):
        candidate = os.path.join(exp_dir, label, "config.ini")
        if os.path.isfile(candidate):
            return load_config(candidate)
    return None


def _ensure_random_runs(exp_dir: str, n_runs: int) -> None:
    cfg = _find_experiment_config(exp_dir)
    if cfg is None:
        raise FileNotFoundError(
            f"no config.ini under {exp_dir}; train at least one algorithm first")
    random_dir = os.path.join(exp_dir, "random")
    os.makedirs(random_dir, exist_ok=True)
    for seed in range(n_runs):
        records = random_reference_records(cfg, seed)
        write_metrics_csv(os.path.join(random_dir, f"{seed}.csv"), records)


def cmd_compare(args) -> int:
    exp_dir = args.results_dir
    if args.random_runs > 0:
        _ensure_random_runs(exp_dir, args.random_runs)
    runs = discover_runs(exp_dir)
    if not runs:
        print(f"no runs found under {exp_dir}", file=sys.stderr)
        return EXIT_ERROR
    if "random" not in runs:
        print(
            "missing random-policy reference runs; rerun with "
            "`compare --random-runs N` to generate them",
            file=sys.stderr,
        )
        return EXIT_ERROR
    baseline = args.baseline
    if baseline not in runs:
        print(f"baseline '{baseline}' has no runs under {exp_dir}", file=sys.stderr)
        return EXIT_ERROR

    j_h_only = iqm(final_returns(runs[baseline]))
    j_random = iqm(final_returns(runs["random"]))
    try:
        normalized_return(j_h_only, j_h_only, j_random)
    except DegenerateNormalization:
        print(
            f"warning: degenerate normalization references "
            f"(baseline {j_h_only!r} vs random {j_random!r}); task excluded",
            file=sys.stderr,
        )
        return EXIT_ERROR

    labels = sorted(label for label in runs if label != "random")
    baseline_scores = np.array([
        normalized_return(j, j_h_only, j_random)
        for j in final_returns(runs[baseline])
    ])
    summary = {
        "baseline": baseline,
        "j_h_only_reference": j_h_only,
        "j_random_reference": j_random,
        "algorithms": {},
    }
    table_rows = []
    score_lines = ["algorithm,seed,final_J,normalized_score"]
    for label in labels:
        finals = final_returns(runs[label])
        seeds = sorted(runs[label])
        scores = np.array([
            normalized_return(j, j_h_only, j_random) for j in finals
        ])
        iqm_norm = normalized_return(iqm(finals), j_h_only, j_random)
        lo, hi = bootstrap_ci(scores)
        poi = probability_of_improvement(scores, baseline_scores)
        summary["algorithms"][label] = {
            "seeds": seeds,
            "final_returns": [float(x) for x in finals],
            "normalized_scores": [float(x) for x in scores],
            "iqm_normalized": iqm_norm,
            "ci95": [lo, hi],
            "poi_vs_baseline": poi,
        }
        table_rows.append((label, iqm_norm, lo, hi, poi, len(seeds)))
        for seed, j, score in zip(seeds, finals, scores):
            score_lines.append(f"{label},{seed},{float(j)!r},{float(score)!r}")

    report_dir = os.path.join(exp_dir, "report")
    os.makedirs(report_dir, exist_ok=True)
    with open(os.path.join(report_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(report_dir, "scores.csv"), "w", encoding="utf-8",
              newline="") as fh:
        fh.write("\n".join(score_lines) + "\n")

    print(f"references: baseline={baseline} J={j_h_only:.6g}, random J={j_random:.6g}")
    header = f"{'algorithm':<18} {'IQM(norm)':>10} {'95% CI':>20} {'PoI vs base':>12} {'runs':>5}"
    print(header)
    print("-" * len(header))
    for label, iqm_norm, lo, hi, poi, n in table_rows:
        print(f"{label:<18} {iqm_norm:>10.4f} [{lo:>8.4f}, {hi:>8.4f}] "
              f"{poi:>12.4f} {n:>5}")
    print(f"report written to {report_dir}/")
    return EXIT_OK


def cmd_stats(args) -> int:
    runs = discover_runs(args.results_dir)
    if not runs:
        print(f"no runs found under {args.results_dir}", file=sys.stderr)
        return EXIT_ERROR
    header = (f"{'algorithm':<18} {'IQM J':>10} {'IQM H':>12} "
              f"{'IQM success':>12} {'runs':>5}")
    print(header)
    print("-" * len(header))
    for label in sorted(runs):
        j = iqm(final_returns(runs[label], "j_return"))
        h = iqm(final_returns(runs[label], "h_return"))
        s = iqm(final_returns(runs[label], "success_rate"))
        print(f"{label:<18} {j:>10.4f} {h:>12.4f} {s:>12.4f} "
              f"{len(runs[label]):>5}")
    return EXIT_OK


def cmd_plot(args) -> int:
    runs = discover_runs(args.results_dir)
    runs = {label: seed_runs for label, seed_runs in runs.items()
            if label != "random"}
    if not runs:
        print(f"no runs found under {args.results_dir}", file=sys.stderr)
        return EXIT_ERROR
    report_dir = os.path.join(args.results_dir, "report")
    written = plot_all(runs, report_dir)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    names = args.checks if args.checks else sorted(ALL_CHECKS)
    try:
        results = run_checks(names)
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    all_ok = True
    for result in results:
        print(result.line())
        all_ok = all_ok and result.ok
    return EXIT_OK if all_ok else EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hepo-lab",
        description="Constrained dual-policy optimization on dual-reward "
                    "desk-scale environments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train the configured algorithm")
    p_train.add_argument("--config", required=True, help="path to an INI config")
    p_train.add_argument("--seeds", default=None,
                         help="comma-separated seed list (overrides config and "
                              "HEPO_LAB_SEED)")
    p_train.add_argument("--out", default=None, help="output root directory")
    p_train.add_argument("--jobs", type=int, default=1,
                         help="parallel worker processes across seeds")
    p_train.set_defaults(func=cmd_train)

    p_compare = sub.add_parser("compare", help="aggregate an experiment directory")
    p_compare.add_argument("results_dir", help="experiment directory from train")
    p_compare.add_argument("--baseline", default="h_only")
    p_compare.add_argument("--random-runs", type=int, default=0,
                           help="generate N uniform-random reference runs first")
    p_compare.set_defaults(func=cmd_compare)

    p_stats = sub.add_parser("stats", help="raw per-algorithm summaries")
    p_stats.add_argument("results_dir")
    p_stats.set_defaults(func=cmd_stats)

    p_plot = sub.add_parser("plot", help="render learning-curve figures")
    p_plot.add_argument("results_dir")
    p_plot.set_defaults(func=cmd_plot)

    p_oracle = sub.add_parser("oracle", help="run identity check suites")
    p_oracle.add_argument("checks", nargs="*",
                          help=f"subset of {sorted(ALL_CHECKS)} (default: all)")
    p_oracle.set_defaults(func=cmd_oracle)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
