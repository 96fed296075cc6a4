"""Self-checking identity suites over random instances.

Each check computes the same quantity along two independent routes and
reports the worst disagreement:

  pdl        return gap between two random policies vs the occupancy-
             weighted advantage sum (policy evaluation vs linear solve);
  pbrs       greedy policy of a randomly potential-shaped reward vs the
             plain reward, via value iteration;
  gae        lambda=1 advantage recursion vs direct discounted
             Monte-Carlo returns on random episodes;
  gradcheck  reverse-mode gradients of every training loss vs central
             finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .advantages import gae
from .envs.tabular import (
    TabularMdp,
    discounted_occupancy,
    exact_advantage,
    policy_evaluation,
    value_iteration,
)
from .nets import (
    MlpSpec,
    Policy,
    init_mlp_params,
    make_policy,
    mlp_forward_tape,
    policy_entropy_tape,
    policy_log_prob_tape,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: int
    total: int
    max_error: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return self.passed == self.total

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return (f"{self.name}: {self.passed}/{self.total} within "
                f"{self.tolerance:g} (max error {self.max_error:.3e}) -> {status}")


def random_mdp(rng: np.random.Generator, n_states: int = 5,
               n_actions: int = 3, gamma: float = 0.9) -> TabularMdp:
    p = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    r = rng.uniform(-1.0, 1.0, size=(n_states, n_actions))
    h = rng.uniform(-1.0, 1.0, size=(n_states, n_actions))
    start = rng.dirichlet(np.ones(n_states))
    return TabularMdp(p=p, r=r, h=h, gamma=gamma, start=start,
                      terminal=np.zeros(n_states, dtype=bool))


def random_policy_matrix(rng: np.random.Generator, n_states: int,
                         n_actions: int) -> np.ndarray:
    return rng.dirichlet(np.ones(n_actions), size=n_states)


def check_pdl(n_cases: int = 100, seed: int = 12345,
              tolerance: float = 1e-8) -> CheckResult:
    """J(pi) - J(pi') equals the pi-occupancy-weighted advantage of pi'."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    passed = 0
    for _ in range(n_cases):
        mdp = random_mdp(rng)
        pol_a = random_policy_matrix(rng, mdp.n_states, mdp.n_actions)
        pol_b = random_policy_matrix(rng, mdp.n_states, mdp.n_actions)
        j_a = float(mdp.start @ policy_evaluation(mdp, pol_a, "task"))
        j_b = float(mdp.start @ policy_evaluation(mdp, pol_b, "task"))
        occupancy = discounted_occupancy(mdp, pol_a)
        rhs = float((occupancy * exact_advantage(mdp, pol_b, "task")).sum())
        err = abs((j_a - j_b) - rhs)
        worst = max(worst, err)
        passed += err < tolerance
    return CheckResult("pdl", passed, n_cases, worst, tolerance)


def check_pbrs(n_cases: int = 100, seed: int = 23456) -> CheckResult:
    """Potential shaping never changes the greedy optimal policy."""
    rng = np.random.default_rng(seed)
    passed = 0
    mismatches = 0
    for _ in range(n_cases):
        mdp = random_mdp(rng)
        potential = rng.uniform(-1.0, 1.0, size=mdp.n_states)
        shaped = mdp.r + mdp.gamma * mdp.p @ potential - potential[:, None]
        _, greedy_plain = value_iteration(mdp, "task")
        _, greedy_shaped = value_iteration(mdp, shaped)
        if np.array_equal(greedy_plain, greedy_shaped):
            passed += 1
        else:
            mismatches += 1
    return CheckResult("pbrs", passed, n_cases, float(mismatches), 0.0)


def _mc_advantages(rewards, values, bootstrap, terminated, gamma):
    """Discounted tail sums minus values; a truncated episode bootstraps
    its tail with the final next-state value."""
    n = len(rewards)
    returns = np.zeros(n)
    tail = 0.0 if terminated else float(bootstrap)
    for t in range(n - 1, -1, -1):
        tail = rewards[t] + gamma * tail
        returns[t] = tail
    return returns - values


def check_gae_mc(n_cases: int = 100, seed: int = 34567,
                 tolerance: float = 1e-6) -> CheckResult:
    """GAE at lambda=1 equals Monte-Carlo advantages on single episodes."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    passed = 0
    for case in range(n_cases):
        n = int(rng.integers(3, 40))
        gamma = float(rng.uniform(0.8, 1.0))
        rewards = rng.normal(size=n)
        values = rng.normal(size=n)
        next_values = np.concatenate([values[1:], rng.normal(size=1)])
        terminated = case % 2 == 0  # alternate terminal and truncated ends
        term_flags = np.zeros(n)
        done_flags = np.zeros(n)
        term_flags[-1] = 1.0 if terminated else 0.0
        done_flags[-1] = 1.0
        adv = gae(rewards, values, next_values, term_flags, done_flags,
                  gamma, lam=1.0)
        mc = _mc_advantages(rewards, values, next_values[-1], terminated, gamma)
        err = float(np.max(np.abs(adv - mc)))
        worst = max(worst, err)
        passed += err < tolerance
    return CheckResult("gae", passed, n_cases, worst, tolerance)


def _finite_difference(loss_fn, values: np.ndarray, step: float = 1e-5) -> np.ndarray:
    fd = np.zeros_like(values)
    for i in range(values.size):
        bumped = values.copy()
        bumped[i] += step
        up = loss_fn(bumped)
        bumped[i] -= 2 * step
        down = loss_fn(bumped)
        fd[i] = (up - down) / (2 * step)
    return fd


def _relative_error(grad: np.ndarray, fd: np.ndarray) -> float:
    scale = max(np.max(np.abs(grad)), np.max(np.abs(fd)), 1e-8)
    return float(np.max(np.abs(grad - fd)) / scale)


def _surrogate_loss(policy: Policy, obs, actions, behavior_logp, utilities,
                    clip_epsilon, entropy_coef):
    def loss_tensor(values: np.ndarray) -> tuple[ad.Tensor, ad.Tensor]:
        leaf = ad.Tensor(values)
        logp = policy_log_prob_tape(policy, leaf, obs, actions)
        ratios = ad.exp(ad.sub(logp, behavior_logp))
        unclipped = ad.mul(ratios, utilities)
        clipped = ad.mul(ad.clip(ratios, 1.0 - clip_epsilon, 1.0 + clip_epsilon),
                         utilities)
        objective = ad.mean(ad.minimum(unclipped, clipped))
        if entropy_coef > 0.0:
            objective = ad.add(objective,
                               ad.mul(policy_entropy_tape(policy, leaf, obs),
                                      entropy_coef))
        return ad.mul(objective, -1.0), leaf

    def loss_fn(values: np.ndarray) -> float:
        return float(loss_tensor(values)[0].value)

    return loss_fn, loss_tensor


def check_gradients(seed: int = 45678, tolerance: float = 1e-4) -> CheckResult:
    """Every training loss: reverse-mode vs central finite differences."""
    rng = np.random.default_rng(seed)
    errors = []

    # categorical and gaussian clipped surrogates, with and without entropy
    for kind, act_dim in (("categorical", 3), ("gaussian", 2)):
        policy = make_policy(kind, 4, act_dim, (5,), "tanh",
                             np.random.default_rng(seed + act_dim))
        n = 12
        obs = rng.normal(size=(n, 4))
        if kind == "categorical":
            actions = rng.integers(0, act_dim, size=n)
        else:
            actions = rng.normal(size=(n, act_dim))
        behavior = policy.log_prob(obs, actions) + rng.normal(scale=0.05, size=n)
        utilities = rng.normal(size=n)
        for entropy_coef in (0.0, 0.01):
            loss_fn, loss_tensor = _surrogate_loss(
                policy, obs, actions, behavior, utilities, 0.2, entropy_coef)
            base = policy.params.values.copy()
            t, leaf = loss_tensor(base)
            ad.backward(t)
            errors.append(_relative_error(leaf.grad, _finite_difference(loss_fn, base)))

    # value regression
    spec = MlpSpec(3, (6,), 1, "tanh")
    params = init_mlp_params(spec, np.random.default_rng(seed + 9), output_gain=1.0)
    obs = rng.normal(size=(10, 3))
    targets = rng.normal(size=10)

    def value_loss_tensor(values: np.ndarray) -> tuple[ad.Tensor, ad.Tensor]:
        leaf = ad.Tensor(values)
        pred = mlp_forward_tape(leaf, params, spec, obs)
        err = ad.sub(ad.reshape(pred, (10,)), targets)
        return ad.mean(ad.mul(err, err)), leaf

    def value_loss(values: np.ndarray) -> float:
        return float(value_loss_tensor(values)[0].value)

    t, leaf = value_loss_tensor(params.values.copy())
    ad.backward(t)
    errors.append(_relative_error(leaf.grad,
                                  _finite_difference(value_loss, params.values.copy())))

    worst = max(errors)
    passed = sum(e < tolerance for e in errors)
    return CheckResult("gradcheck", passed, len(errors), worst, tolerance)


ALL_CHECKS = {
    "pdl": check_pdl,
    "pbrs": check_pbrs,
    "gae": check_gae_mc,
    "gradcheck": check_gradients,
}


def run_checks(names: list[str]) -> list[CheckResult]:
    results = []
    for name in names:
        if name not in ALL_CHECKS:
            raise ValueError(f"unknown check {name!r}; choose from {sorted(ALL_CHECKS)}")
        results.append(ALL_CHECKS[name]())
    return results
