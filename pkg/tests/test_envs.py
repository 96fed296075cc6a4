"""Environment mechanics, analytic returns, and enumeration round trips."""
import numpy as np
import pytest

from hepo_lab.envs import (
    GridGoal,
    PointMass,
    SparseChain,
    policy_evaluation,
    policy_return,
    to_tabular,
    value_iteration,
)
from hepo_lab.rollout import RngStream, STREAM_ENV


def fresh_rng(seed=0):
    return RngStream(seed, STREAM_ENV).generator()


def run_greedy_right(env, rng, max_steps=200):
    """Drive a chain with the RIGHT action until the episode ends."""
    env.reset(rng)
    total = 0.0
    discount = 1.0
    gamma = env.gamma
    for _ in range(max_steps):
        out = env.step(1, rng)
        total += discount * out.task_reward
        discount *= gamma
        if out.terminated or out.truncated:
            return total, out
    raise AssertionError("episode never ended")


def test_chain_analytic_discounted_return():
    # entering state N on step N earns gamma^(N-1) discounted from the start
    for n, gamma in ((3, 0.9), (5, 0.99), (10, 0.8)):
        env = SparseChain(n=n, gamma=gamma)
        total, out = run_greedy_right(env, fresh_rng())
        assert out.terminated
        assert abs(total - gamma ** (n - 1)) < 1e-12


def test_chain_three_at_point_nine_is_081():
    env = SparseChain(n=3, gamma=0.9)
    total, _ = run_greedy_right(env, fresh_rng())
    assert abs(total - 0.81) < 1e-12


def test_chain_left_clamps_at_zero():
    env = SparseChain(n=4)
    obs = env.reset(fresh_rng())
    assert obs.state_index == 0
    out = env.step(0, fresh_rng())
    assert out.observation.state_index == 0


def test_chain_truncates_at_cap():
    env = SparseChain(n=5, max_episode_steps=3)
    env.reset(fresh_rng())
    rng = fresh_rng()
    outs = [env.step(0, rng) for _ in range(3)]
    assert not outs[0].truncated and not outs[1].truncated
    assert outs[2].truncated and not outs[2].terminated


def test_step_after_done_raises():
    env = SparseChain(n=3)
    env.reset(fresh_rng())
    rng = fresh_rng()
    for _ in range(3):
        out = env.step(1, rng)
    assert out.terminated
    with pytest.raises(RuntimeError):
        env.step(1, rng)


def test_chain_shaping_rewards_progress():
    env = SparseChain(n=6, heuristic="potential_shaping")
    env.reset(fresh_rng())
    rng = fresh_rng()
    right = env.step(1, rng)
    assert right.heuristic_reward > 0  # moving toward the goal pays
    left = env.step(0, rng)
    assert left.heuristic_reward < 0


def test_grid_reset_deterministic():
    a = GridGoal(4, 4)
    b = GridGoal(4, 4)
    oa = a.reset(fresh_rng(5))
    ob = b.reset(fresh_rng(5))
    assert np.array_equal(oa.features, ob.features)
    assert oa.state_index == ob.state_index


def test_grid_wrong_sign_decreases_toward_goal():
    env = GridGoal(4, 4, heuristic="wrong_sign_distance")
    env.reset(fresh_rng())
    rng = fresh_rng()
    toward = env.step(3, rng)   # RIGHT, toward the (3,3) goal
    away = env.step(2, rng)     # LEFT, back toward the start corner
    assert toward.heuristic_reward < away.heuristic_reward


def test_grid_moves_clamp_at_walls():
    env = GridGoal(3, 3)
    env.reset(fresh_rng())
    out = env.step(1, fresh_rng())  # DOWN from (0,0)
    assert out.observation.state_index == 0


def test_grid_goal_terminates_with_unit_reward():
    env = GridGoal(2, 2)
    env.reset(fresh_rng())
    rng = fresh_rng()
    env.step(3, rng)            # RIGHT to (1,0)
    out = env.step(0, rng)      # UP to (1,1) = goal
    assert out.terminated and out.task_reward == 1.0


def test_grid_slip_probability_matches_three_sigma():
    env = GridGoal(5, 5, slip_prob=0.2)
    rng = fresh_rng(3)
    n = 4000
    moved_right = 0
    for _ in range(n):
        env.reset(rng)
        out = env.step(3, rng)   # intended RIGHT from (0,0)
        x = out.observation.state_index % 5
        moved_right += int(x == 1 and out.observation.state_index // 5 == 0)
    # P(end at (1,0)) = 1 - slip + slip/4 = 0.85
    p = 0.85
    sigma = np.sqrt(p * (1 - p) / n)
    assert abs(moved_right / n - p) < 3.5 * sigma


def test_grid_trap_lure_pays_bonus_inside_trap():
    env = GridGoal(6, 6, heuristic="trap_lure", trap_bonus=0.5)
    assert (4, 5) in env.trap_cells and (5, 4) in env.trap_cells
    mdp = to_tabular(env)
    # heuristic reward for stepping into a trap cell exceeds pure shaping
    s_before = 5 * 6 + 3   # (3,5), left of trap (4,5)
    plain = GridGoal(6, 6, heuristic="potential_shaping")
    mdp_plain = to_tabular(plain)
    assert mdp.h[s_before, 3] > mdp_plain.h[s_before, 3] + 0.4


def test_trap_grid_admits_hacking():
    """The h-optimal policy must sacrifice task return; that gap is the
    whole point of the trap environment."""
    env = GridGoal(6, 6, slip_prob=0.04, heuristic="trap_lure",
                   trap_bonus=0.3, max_episode_steps=48)
    mdp = to_tabular(env)
    _, greedy_h = value_iteration(mdp, "heuristic")
    j_hacker = policy_return(mdp, greedy_h, "task")
    v_task, _ = value_iteration(mdp, "task")
    j_star = float(mdp.start @ v_task)
    assert j_hacker < j_star - 0.3


def test_to_tabular_shapes_and_start():
    env = SparseChain(n=4)
    mdp = to_tabular(env)
    assert mdp.p.shape == (5, 2, 5)
    assert mdp.r.shape == (5, 2)
    assert mdp.start[0] == 1.0
    # value iteration on the enumerated chain recovers the analytic return
    v, greedy = value_iteration(mdp, "task")
    assert abs(float(mdp.start @ v) - env.gamma ** 3) < 1e-10
    assert np.all(greedy[:4] == 1)


def test_to_tabular_rejects_continuous():
    with pytest.raises(TypeError):
        to_tabular(PointMass())


def test_tabular_policy_evaluation_matches_rollout_mean():
    env = SparseChain(n=3, gamma=0.9)
    mdp = to_tabular(env)
    always_right = np.ones(mdp.p.shape[0], dtype=int)
    v = policy_evaluation(mdp, always_right, "task")
    assert abs(v[0] - 0.81) < 1e-10


def test_point_mass_dynamics_arithmetic():
    env = PointMass()
    obs = env.reset(fresh_rng(1))
    px, py, vx, vy = obs.features
    out = env.step(np.array([1.0, 0.0]), fresh_rng(1))
    nx, ny, nvx, nvy = out.observation.features
    assert abs(nvx - np.clip(vx + 0.1 * 1.0, -1, 1)) < 1e-12
    assert abs(nx - np.clip(px + 0.1 * nvx, -1, 1)) < 1e-12
    assert abs(nvy - vy) < 1e-12
    assert out.heuristic_reward <= 0  # negative distance to goal


def test_point_mass_reaches_goal_under_scripted_push():
    env = PointMass(goal=(0.0, 0.0), goal_radius=0.3)
    env.reset(fresh_rng(2))
    rng = fresh_rng(2)
    terminated = False
    for _ in range(120):
        action = -np.sign(env._pos)  # steer toward the origin goal
        out = env.step(action, rng)
        if out.terminated:
            terminated = True
            assert out.task_reward == 1.0
            break
    assert terminated


def test_heuristic_env_rewards_finite_under_random_play():
    for env in (SparseChain(n=5, heuristic="action_penalty"),
                GridGoal(4, 4, heuristic="trap_lure"),
                PointMass()):
        rng = fresh_rng(9)
        env.reset(rng)
        for _ in range(50):
            if env.action_spec.is_discrete:
                action = rng.integers(0, env.action_spec.n)
            else:
                action = rng.uniform(-1, 1, env.action_spec.dim)
            out = env.step(action, rng)
            assert np.isfinite(out.task_reward)
            assert np.isfinite(out.heuristic_reward)
            if out.terminated or out.truncated:
                env.reset(rng)
