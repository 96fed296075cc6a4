"""Parametric approximators: flat parameter vectors, MLPs, policies, Adam.

Every approximator's parameters live in one flat float64 array with a
name -> (offset, shape) registry, so optimizers and gradient checks
work on plain vectors.  An `MlpSpec` with no hidden layers is a single
linear map, which over one-hot features is exactly a table.

Two forward implementations exist side by side: a plain numpy pass used
during rollouts, and a tape pass (`autodiff.Tensor`) used inside losses.
Their agreement is pinned by tests down to ratio identities.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class ParamVector:
    values: np.ndarray
    slots: dict[str, tuple[int, tuple[int, ...]]]

    @classmethod
    def build(cls, shapes: list[tuple[str, tuple[int, ...]]]) -> "ParamVector":
        slots: dict[str, tuple[int, tuple[int, ...]]] = {}
        offset = 0
        for name, shape in shapes:
            size = int(np.prod(shape)) if shape else 1
            slots[name] = (offset, tuple(shape))
            offset += size
        return cls(values=np.zeros(offset), slots=slots)

    def view(self, name: str) -> np.ndarray:
        offset, shape = self.slots[name]
        size = int(np.prod(shape)) if shape else 1
        return self.values[offset:offset + size].reshape(shape)

    def copy(self) -> "ParamVector":
        return ParamVector(values=self.values.copy(), slots=self.slots)

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden: tuple[int, ...]
    output_dim: int
    activation: str = "tanh"

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1 or any(h < 1 for h in self.hidden):
            raise ValueError("all layer sizes must be >= 1")
        if self.activation not in ("tanh", "relu"):
            raise ValueError(f"unsupported activation {self.activation!r}")

    def layer_dims(self) -> list[tuple[int, int]]:
        dims = [self.input_dim, *self.hidden, self.output_dim]
        return list(zip(dims[:-1], dims[1:]))


def mlp_shapes(spec: MlpSpec) -> list[tuple[str, tuple[int, ...]]]:
    shapes: list[tuple[str, tuple[int, ...]]] = []
    for i, (fan_in, fan_out) in enumerate(spec.layer_dims()):
        shapes.append((f"w{i}", (fan_in, fan_out)))
        shapes.append((f"b{i}", (fan_out,)))
    return shapes


def _orthogonal(rng: np.random.Generator, fan_in: int, fan_out: int,
                gain: float) -> np.ndarray:
    a = rng.normal(size=(max(fan_in, fan_out), min(fan_in, fan_out)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))  # fix the sign ambiguity for determinism
    if fan_in < fan_out:
        q = q.T
    return gain * q[:fan_in, :fan_out]


def init_mlp_params(spec: MlpSpec, rng: np.random.Generator,
                    output_gain: float = 1.0,
                    extra_shapes: list[tuple[str, tuple[int, ...]]] | None = None
                    ) -> ParamVector:
    """Orthogonal weight init (hidden gain sqrt(2), output layer `output_gain`),
    zero biases, zero extras."""
    shapes = mlp_shapes(spec) + list(extra_shapes or [])
    params = ParamVector.build(shapes)
    n_layers = len(spec.layer_dims())
    for i, (fan_in, fan_out) in enumerate(spec.layer_dims()):
        gain = output_gain if i == n_layers - 1 else float(np.sqrt(2.0))
        params.view(f"w{i}")[...] = _orthogonal(rng, fan_in, fan_out, gain)
    return params


def mlp_forward(params: ParamVector, spec: MlpSpec, x: np.ndarray) -> np.ndarray:
    """Plain numpy forward pass; activation on hidden layers only."""
    act = np.tanh if spec.activation == "tanh" else lambda z: np.maximum(z, 0.0)
    h = np.asarray(x, dtype=float)
    n_layers = len(spec.layer_dims())
    for i in range(n_layers):
        h = h @ params.view(f"w{i}") + params.view(f"b{i}")
        if i < n_layers - 1:
            h = act(h)
    return h


def mlp_forward_tape(leaf: ad.Tensor, params: ParamVector, spec: MlpSpec,
                     x: np.ndarray) -> ad.Tensor:
    """Tape forward pass; `leaf` is the flat parameter Tensor."""
    act = ad.tanh if spec.activation == "tanh" else ad.relu
    h = np.asarray(x, dtype=float)
    n_layers = len(spec.layer_dims())
    for i in range(n_layers):
        w_off, w_shape = params.slots[f"w{i}"]
        b_off, b_shape = params.slots[f"b{i}"]
        w = ad.reshape(ad.slice1d(leaf, w_off, int(np.prod(w_shape))), w_shape)
        b = ad.slice1d(leaf, b_off, b_shape[0])
        h = ad.add(ad.matmul(h, w), b)
        if i < n_layers - 1:
            h = act(h)
    return h


@dataclass(frozen=True)
class Categorical:
    logits: np.ndarray  # (B, K)

    def log_probs(self) -> np.ndarray:
        shifted = self.logits - self.logits.max(axis=1, keepdims=True)
        return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))

    def log_prob(self, actions: np.ndarray) -> np.ndarray:
        lp = self.log_probs()
        return lp[np.arange(lp.shape[0]), np.asarray(actions, dtype=int)]

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        probs = np.exp(self.log_probs())
        cum = probs.cumsum(axis=1)
        u = rng.random(probs.shape[0])[:, None]
        idx = (u > cum).sum(axis=1)
        return np.minimum(idx, probs.shape[1] - 1)

    def entropy(self) -> np.ndarray:
        lp = self.log_probs()
        return -(np.exp(lp) * lp).sum(axis=1)


@dataclass(frozen=True)
class DiagonalGaussian:
    mean: np.ndarray     # (B, D)
    log_std: np.ndarray  # (D,)

    def log_prob(self, actions: np.ndarray) -> np.ndarray:
        var = np.exp(2.0 * self.log_std)
        z = (np.asarray(actions, dtype=float) - self.mean) ** 2 / var
        d = self.mean.shape[1]
        return -0.5 * z.sum(axis=1) - self.log_std.sum() - 0.5 * d * LOG_2PI

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        noise = rng.standard_normal(self.mean.shape)
        return self.mean + np.exp(self.log_std) * noise

    def entropy(self) -> np.ndarray:
        d = self.mean.shape[1]
        per_draw = self.log_std.sum() + 0.5 * d * (1.0 + LOG_2PI)
        return np.full(self.mean.shape[0], per_draw)


@dataclass
class Policy:
    """A stochastic policy: categorical over discrete actions or diagonal
    Gaussian over box actions (state-independent log-std, initialized 0)."""

    kind: str  # "categorical" | "gaussian"
    spec: MlpSpec
    params: ParamVector

    def distribution(self, obs: np.ndarray):
        out = mlp_forward(self.params, self.spec, obs)
        if self.kind == "categorical":
            return Categorical(logits=out)
        return DiagonalGaussian(mean=out, log_std=self.params.view("log_std"))

    def sample(self, obs: np.ndarray, rng: np.random.Generator):
        dist = self.distribution(obs)
        actions = dist.sample(rng)
        return actions, dist.log_prob(actions)

    def log_prob(self, obs: np.ndarray, actions: np.ndarray) -> np.ndarray:
        return self.distribution(obs).log_prob(actions)


def make_policy(kind: str, obs_dim: int, action_dim: int,
                hidden: tuple[int, ...], activation: str,
                rng: np.random.Generator) -> Policy:
    if kind not in ("categorical", "gaussian"):
        raise ValueError(f"unknown policy kind {kind!r}")
    spec = MlpSpec(obs_dim, tuple(hidden), action_dim, activation)
    extras = [("log_std", (action_dim,))] if kind == "gaussian" else None
    params = init_mlp_params(spec, rng, output_gain=0.01, extra_shapes=extras)
    return Policy(kind=kind, spec=spec, params=params)


def policy_log_prob_tape(policy: Policy, leaf: ad.Tensor, obs: np.ndarray,
                         actions: np.ndarray) -> ad.Tensor:
    """Per-sample log-probabilities as a tape node over the flat params."""
    out = mlp_forward_tape(leaf, policy.params, policy.spec, obs)
    if policy.kind == "categorical":
        return ad.gather_rows(ad.log_softmax(out), actions)
    off, shape = policy.params.slots["log_std"]
    log_std = ad.slice1d(leaf, off, shape[0])
    inv_var = ad.exp(ad.mul(log_std, -2.0))
    diff = ad.sub(np.asarray(actions, dtype=float), out)
    z = ad.sum_(ad.mul(ad.mul(diff, diff), inv_var), axis=1)
    d = shape[0]
    const = -0.5 * d * LOG_2PI
    return ad.add(ad.sub(ad.mul(z, -0.5), ad.sum_(log_std)), const)


def policy_entropy_tape(policy: Policy, leaf: ad.Tensor, obs: np.ndarray) -> ad.Tensor:
    """Mean entropy over the batch as a tape scalar."""
    if policy.kind == "categorical":
        out = mlp_forward_tape(leaf, policy.params, policy.spec, obs)
        lp = ad.log_softmax(out)
        per_row = ad.mul(ad.sum_(ad.mul(ad.exp(lp), lp), axis=1), -1.0)
        return ad.mean(per_row)
    off, shape = policy.params.slots["log_std"]
    log_std = ad.slice1d(leaf, off, shape[0])
    d = shape[0]
    return ad.add(ad.sum_(log_std), 0.5 * d * (1.0 + LOG_2PI))


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: ParamVector, lr: float,
                   beta1: float = 0.9, beta2: float = 0.999,
                   eps: float = 1e-8) -> "AdamState":
        n = len(params)
        return cls(m=np.zeros(n), v=np.zeros(n), step=0, lr=lr,
                   beta1=beta1, beta2=beta2, eps=eps)


def adam_step(params: ParamVector, grad: np.ndarray, state: AdamState) -> None:
    """Standard bias-corrected Adam update, in place."""
    if grad.shape != params.values.shape:
        raise ValueError("gradient shape does not match parameters")
    state.step += 1
    # non-finite intermediates are caught by the guard below, so numpy
    # warnings on the way there are suppressed
    with np.errstate(invalid="ignore", over="ignore"):
        state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
        state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
        m_hat = state.m / (1.0 - state.beta1 ** state.step)
        v_hat = state.v / (1.0 - state.beta2 ** state.step)
        params.values -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    if not np.all(np.isfinite(params.values)):
        raise FloatingPointError("non-finite parameters after optimizer step")


def clip_gradient_norm(grad: np.ndarray, max_norm: float) -> np.ndarray:
    norm = float(np.linalg.norm(grad))
    if norm > max_norm > 0.0:
        return grad * (max_norm / norm)
    return grad
