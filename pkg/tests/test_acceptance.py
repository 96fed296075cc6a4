"""Acceptance suite: nine go/no-go checks, one test per criterion.

Each test prints a single `criterion N (...): PASS|FAIL` line before its
asserts, so the verdicts read off the captured output in one screen.
Criteria 4-7 train real runs; their experiment fixtures are module-scoped
and shared, which keeps the whole file within the stated time budgets.

Known limitation, kept as a genuine failure rather than papered over: in
criterion 5 the misleading-heuristic setting makes the companion policy
camp away from the goal with zero task return, so the constraint is
satisfied from the first iteration, the multiplier stays pinned at zero,
and the trained policy receives the misleading dense signal at full
weight.  Its success therefore tracks the task+heuristic baseline, well
below the task-only baseline.  The second clause (the heuristic-only
policy fails) and the companion comparison (constrained beats
task+heuristic) both hold.  README covers the analysis.
"""
import os
import time

import numpy as np
import pytest

from hepo_lab.alpha_control import AlphaConfig, AlphaState, update_alpha
from hepo_lab.cli import EXIT_OK, main
from hepo_lab.config import ALGORITHMS, parse_config, replace
from hepo_lab.oracles import run_checks
from hepo_lab.runio import discover_runs
from hepo_lab.stats import (
    iqm,
    normalized_return,
    poi_bootstrap_ci,
    probability_of_improvement,
)
from hepo_lab.training import (
    baseline_iteration,
    hepo_iteration,
    init_run,
    random_reference_records,
    run_training,
)

TRAP_INI = """
[run]
name = trap
algorithm = hepo
iterations = 120
steps_per_iteration = 1024
parallel_envs = 16

[env]
kind = grid_goal
width = 6
height = 6
slip_prob = 0.04
heuristic = trap_lure
trap_bonus = 0.3
max_episode_steps = 48

[ppo]
hidden_sizes =
entropy_coef = 0.01
"""

WRONG_SIGN_INI = """
[run]
name = wrong_sign
algorithm = hepo
iterations = 80
steps_per_iteration = 1024
parallel_envs = 16

[env]
kind = grid_goal
width = 3
height = 3
heuristic = wrong_sign_distance

[ppo]
hidden_sizes =
entropy_coef = 0.01
"""

CHAIN_INI = """
[run]
name = chain
algorithm = hepo
iterations = 100
steps_per_iteration = 1024
parallel_envs = 16

[env]
kind = sparse_chain
n = 25

[ppo]
hidden_sizes =
entropy_coef = 0.01
"""


def _verdict(num: int, name: str, ok: bool, detail: str) -> bool:
    print(f"criterion {num} ({name}): {'PASS' if ok else 'FAIL'} -- {detail}",
          flush=True)
    return ok


def _final_metrics(ini_text: str, algorithm: str, seeds, **overrides):
    cfg = replace(parse_config(ini_text), algorithm=algorithm, **overrides)
    finals = []
    for seed in seeds:
        record = run_training(cfg, seed).records[-1]
        finals.append((record.success_rate, record.j_return))
    success, j = zip(*finals)
    return np.array(success), np.array(j)


# ------------------------------------------------------------ experiments

@pytest.fixture(scope="module")
def trap_runs():
    """Hackable-heuristic grid: constrained runs, heuristic-only runs, the
    alternating-rollout ablation, and random reference returns."""
    seeds = range(10)
    t0 = time.monotonic()
    out = {
        "hepo": _final_metrics(TRAP_INI, "hepo", seeds),
        "h_only": _final_metrics(TRAP_INI, "h_only", seeds),
        "alternating": _final_metrics(TRAP_INI, "hepo", seeds,
                                      rollout="alternating"),
    }
    cfg = parse_config(TRAP_INI)
    out["random_j"] = np.array([
        random_reference_records(cfg, s)[0].j_return for s in seeds
    ])
    out["elapsed"] = time.monotonic() - t0
    return out


@pytest.fixture(scope="module")
def wrong_sign_runs():
    seeds = range(10)
    t0 = time.monotonic()
    out = {
        algo: _final_metrics(WRONG_SIGN_INI, algo, seeds)
        for algo in ("hepo", "j_only", "h_only", "j_plus_h")
    }
    out["elapsed"] = time.monotonic() - t0
    return out


@pytest.fixture(scope="module")
def chain_runs():
    seeds = range(5)
    t0 = time.monotonic()
    out = {
        algo: _final_metrics(CHAIN_INI, algo, seeds)
        for algo in ("hepo", "h_only", "j_only")
    }
    out["elapsed"] = time.monotonic() - t0
    return out


# -------------------------------------------------------------- criteria

def test_criterion_1_oracle_identities():
    t0 = time.monotonic()
    results = run_checks(["pdl", "pbrs", "gae", "gradcheck"])
    elapsed = time.monotonic() - t0
    ok = all(r.ok for r in results) and elapsed < 10.0
    detail = "; ".join(r.line() for r in results) + f"; {elapsed:.1f}s"
    _verdict(1, "identity checks", ok, detail)
    for r in results:
        assert r.ok, r.line()
    assert elapsed < 10.0


def test_criterion_2_controller_contracts():
    t0 = time.monotonic()
    cfg = AlphaConfig()
    defaults_ok = (cfg.alpha_init == 0.0 and cfg.step_size == 0.01
                   and cfg.delta_clip == 1.0 and cfg.window == 8)

    state = AlphaState.create(cfg)
    rng = np.random.default_rng(0)
    projection_ok = True
    clip_ok = True
    sign_ok = True
    prev = state.alpha
    for _ in range(500):
        update_alpha(state, float(rng.normal(scale=5.0)), cfg)
        projection_ok &= state.alpha >= 0.0
        clip_ok &= abs(state.alpha - prev) <= cfg.delta_clip + 1e-12
        med = float(np.median(state.records))
        moved = state.alpha - prev
        if med > 0:
            sign_ok &= moved <= 0
        elif med < 0:
            sign_ok &= moved >= 0
        prev = state.alpha

    # a single wild record among eight must not flip the direction
    state2 = AlphaState.create(AlphaConfig(alpha_init=2.0))
    state2.alpha = 2.0
    for _ in range(8):
        update_alpha(state2, 1.0, AlphaConfig())
    before = state2.alpha
    update_alpha(state2, -1e9, AlphaConfig())
    outlier_ok = state2.alpha < before

    elapsed = time.monotonic() - t0
    ok = all([defaults_ok, projection_ok, clip_ok, sign_ok, outlier_ok,
              elapsed < 5.0])
    _verdict(2, "multiplier controller contracts", ok,
             f"projection={projection_ok} clip={clip_ok} sign={sign_ok} "
             f"outlier={outlier_ok} defaults={defaults_ok} {elapsed:.2f}s")
    assert defaults_ok and projection_ok and clip_ok and sign_ok and outlier_ok
    assert elapsed < 5.0


class _CountingEnv:
    def __init__(self, inner, counter):
        self.inner = inner
        self.counter = counter
        self.observation_dim = inner.observation_dim
        self.action_spec = inner.action_spec
        self.max_episode_steps = inner.max_episode_steps

    def reset(self, rng):
        return self.inner.reset(rng)

    def step(self, action, rng):
        self.counter[0] += 1
        return self.inner.step(action, rng)


def _counted_iteration(algorithm: str, rollout: str = "joint"):
    cfg = replace(
        parse_config(CHAIN_INI), algorithm=algorithm, rollout=rollout,
        chain_n=4, iterations=2, steps_per_iteration=32, parallel_envs=4,
        epochs=2, minibatches=2, value_epochs=2,
    )
    state = init_run(cfg, seed=0)
    count_pi = [0]
    count_ref = [0]
    state.pool_pi.envs = [_CountingEnv(e, count_pi) for e in state.pool_pi.envs]
    if state.pool_ref is not None:
        state.pool_ref.envs = [_CountingEnv(e, count_ref)
                               for e in state.pool_ref.envs]
    step = hepo_iteration if state.ref is not None else baseline_iteration
    step(state)
    return count_pi, count_ref, state, step


def test_criterion_3_budget_parity():
    b = 32
    lines = []
    ok = True
    for algo in ALGORITHMS:
        count_pi, count_ref, state, step = _counted_iteration(algo)
        if algo in ("hepo", "eipo_variant"):
            good = count_pi[0] == b // 2 and count_ref[0] == b // 2
            lines.append(f"{algo}: {count_pi[0]}+{count_ref[0]}")
        else:
            good = count_pi[0] == b and count_ref[0] == 0
            lines.append(f"{algo}: {count_pi[0]}")
        ok &= good

    # alternating: full budget, one policy at a time, pi first
    count_pi, count_ref, state, step = _counted_iteration(
        "hepo", rollout="alternating")
    ok &= count_pi[0] == b and count_ref[0] == 0
    step(state)
    ok &= count_pi[0] + count_ref[0] == 2 * b and count_ref[0] == b
    lines.append(f"hepo/alternating: {count_pi[0]}+{count_ref[0]} "
                 "over two iterations")

    _verdict(3, "budget parity", ok, "; ".join(lines))
    assert ok


def test_criterion_4_constrained_beats_heuristic_only(trap_runs):
    hepo_success = trap_runs["hepo"][0]
    h_only_success = trap_runs["h_only"][0]
    med_hepo = float(np.median(hepo_success))
    med_h = float(np.median(h_only_success))
    poi = probability_of_improvement(hepo_success, h_only_success)
    lo, hi = poi_bootstrap_ci(hepo_success, h_only_success)
    elapsed = trap_runs["elapsed"]
    ok = (med_hepo >= med_h and poi >= 0.5 and lo >= 0.45 and elapsed < 900)
    _verdict(4, "hackable-heuristic improvement", ok,
             f"median {med_hepo:.3f} vs {med_h:.3f}, PoI={poi:.3f} "
             f"CI=[{lo:.3f},{hi:.3f}], {elapsed:.0f}s for all grid runs")
    assert med_hepo >= med_h
    assert poi >= 0.5
    assert lo >= 0.45
    assert elapsed < 900


def test_criterion_5_misleading_heuristic(wrong_sign_runs):
    hepo_med = float(np.median(wrong_sign_runs["hepo"][0]))
    j_med = float(np.median(wrong_sign_runs["j_only"][0]))
    h_med = float(np.median(wrong_sign_runs["h_only"][0]))
    jh_med = float(np.median(wrong_sign_runs["j_plus_h"][0]))
    elapsed = wrong_sign_runs["elapsed"]
    recovers = hepo_med >= j_med - 0.05
    heuristic_fails = h_med <= 0.1
    ok = recovers and heuristic_fails and elapsed < 600
    _verdict(5, "misleading-heuristic robustness", ok,
             f"constrained {hepo_med:.3f}, task-only {j_med:.3f}, "
             f"heuristic-only {h_med:.3f}, task+heuristic {jh_med:.3f}, "
             f"{elapsed:.0f}s")
    assert heuristic_fails, "misleading heuristic should sink the heuristic-only runs"
    assert hepo_med >= jh_med, \
        "constrained runs should not trail the fixed-weight composition"
    assert elapsed < 600
    assert recovers, (
        "constrained training does not recover task-only performance here: "
        "the companion policy never scores, so the constraint is satisfied "
        "from the start, the multiplier stays at zero, and the misleading "
        "dense signal keeps full weight (see README, known limitations)")


def test_criterion_6_helpful_heuristic_sanity(chain_runs):
    hepo_med = float(np.median(chain_runs["hepo"][0]))
    h_med = float(np.median(chain_runs["h_only"][0]))
    j_med = float(np.median(chain_runs["j_only"][0]))
    elapsed = chain_runs["elapsed"]
    ok = hepo_med >= 0.9 and h_med >= 0.9 and j_med <= 0.5 and elapsed < 600
    _verdict(6, "helpful-heuristic sanity", ok,
             f"constrained {hepo_med:.3f}, heuristic-only {h_med:.3f}, "
             f"task-only {j_med:.3f}, {elapsed:.0f}s")
    assert hepo_med >= 0.9
    assert h_med >= 0.9
    assert j_med <= 0.5
    assert elapsed < 600


def test_criterion_7_joint_rollout_at_least_matches_alternating(trap_runs):
    j_h = iqm(trap_runs["h_only"][1])
    j_rand = iqm(trap_runs["random_j"])
    joint = np.array([normalized_return(j, j_h, j_rand)
                      for j in trap_runs["hepo"][1]])
    alt = np.array([normalized_return(j, j_h, j_rand)
                    for j in trap_runs["alternating"][1]])
    med_joint = float(np.median(joint))
    med_alt = float(np.median(alt))
    ok = med_joint >= med_alt
    _verdict(7, "split-budget rollout ablation", ok,
             f"normalized median joint={med_joint:.3f} vs "
             f"alternating={med_alt:.3f} (refs: baseline {j_h:.3f}, "
             f"random {j_rand:.3f})")
    assert med_joint >= med_alt


def test_criterion_8_statistic_unit_values():
    one = normalized_return(0.731, 0.731, 0.114)
    zero = normalized_return(0.114, 0.731, 0.114)
    mid = iqm(np.arange(1, 101))
    x = np.array([0.2, 0.5, 0.9])
    poi_self = probability_of_improvement(x, x)
    ok = one == 1.0 and zero == 0.0 and mid == 50.5 and poi_self == 0.5
    _verdict(8, "statistics unit values", ok,
             f"baseline->{one}, random->{zero}, IQM(1..100)={mid}, "
             f"PoI(X,X)={poi_self}")
    assert one == 1.0
    assert zero == 0.0
    assert mid == 50.5
    assert poi_self == 0.5


def test_criterion_9_byte_identical_reruns(tmp_path):
    cfg_path = tmp_path / "repro.ini"
    cfg_path.write_text(
        "[run]\nname = repro\nalgorithm = hepo\nseeds = 0\niterations = 4\n"
        "steps_per_iteration = 32\nparallel_envs = 4\n"
        "[env]\nkind = sparse_chain\nn = 4\n"
        "[ppo]\nhidden_sizes =\nepochs = 2\nminibatches = 2\nvalue_epochs = 2\n")
    out_a = str(tmp_path / "a")
    out_b = str(tmp_path / "b")
    assert main(["train", "--config", str(cfg_path), "--out", out_a]) == EXIT_OK
    assert main(["train", "--config", str(cfg_path), "--out", out_b]) == EXIT_OK
    path_a = os.path.join(out_a, "repro", "hepo", "0.csv")
    path_b = os.path.join(out_b, "repro", "hepo", "0.csv")
    with open(path_a, "rb") as fh:
        bytes_a = fh.read()
    with open(path_b, "rb") as fh:
        bytes_b = fh.read()
    ok = bytes_a == bytes_b and len(bytes_a) > 0
    _verdict(9, "byte-identical reruns", ok,
             f"{len(bytes_a)} bytes vs {len(bytes_b)} bytes")
    assert ok
    # the files really are runs, not empty stubs
    assert len(discover_runs(os.path.join(out_a, "repro"))["hepo"][0]) == 4
