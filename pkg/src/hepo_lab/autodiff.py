"""Small reverse-mode autodiff tape over numpy arrays.

Covers exactly the primitives the training losses need: affine layers,
tanh/relu, exp/log, elementwise min, clipping, row gathering, log-softmax,
reductions, and slicing a flat parameter vector into named tensors.
Constants may be passed as plain arrays or scalars; only `Tensor` inputs
receive gradients.

Subgradient conventions at kinks: `minimum` routes the gradient to the
first argument on ties, `clip` passes the gradient through on the
boundary, `relu` uses 0 at the origin.
"""
from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("value", "grad", "parents", "backward_fn")

    def __init__(self, value, parents=(), backward_fn=None):
        self.value = np.asarray(value, dtype=float)
        self.grad = None
        self.parents = parents
        self.backward_fn = backward_fn

    @property
    def shape(self):
        return self.value.shape

    # convenience operators (constants allowed on either side)
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)


def _value(x) -> np.ndarray:
    return x.value if isinstance(x, Tensor) else np.asarray(x, dtype=float)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcast gradient back to the original operand shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _accumulate(t: Tensor, grad: np.ndarray) -> None:
    grad = _unbroadcast(np.asarray(grad, dtype=float), t.value.shape)
    t.grad = grad if t.grad is None else t.grad + grad


def add(a, b) -> Tensor:
    av, bv = _value(a), _value(b)
    out = Tensor(av + bv, parents=tuple(x for x in (a, b) if isinstance(x, Tensor)))

    def backward_fn(g):
        if isinstance(a, Tensor):
            _accumulate(a, g)
        if isinstance(b, Tensor):
            _accumulate(b, g)

    out.backward_fn = backward_fn
    return out


def sub(a, b) -> Tensor:
    av, bv = _value(a), _value(b)
    out = Tensor(av - bv, parents=tuple(x for x in (a, b) if isinstance(x, Tensor)))

    def backward_fn(g):
        if isinstance(a, Tensor):
            _accumulate(a, g)
        if isinstance(b, Tensor):
            _accumulate(b, -g)

    out.backward_fn = backward_fn
    return out


def mul(a, b) -> Tensor:
    av, bv = _value(a), _value(b)
    out = Tensor(av * bv, parents=tuple(x for x in (a, b) if isinstance(x, Tensor)))

    def backward_fn(g):
        if isinstance(a, Tensor):
            _accumulate(a, g * bv)
        if isinstance(b, Tensor):
            _accumulate(b, g * av)

    out.backward_fn = backward_fn
    return out


def matmul(a, b) -> Tensor:
    av, bv = _value(a), _value(b)
    out = Tensor(av @ bv, parents=tuple(x for x in (a, b) if isinstance(x, Tensor)))

    def backward_fn(g):
        if isinstance(a, Tensor):
            _accumulate(a, g @ bv.T)
        if isinstance(b, Tensor):
            _accumulate(b, av.T @ g)

    out.backward_fn = backward_fn
    return out


def tanh(a: Tensor) -> Tensor:
    val = np.tanh(a.value)
    out = Tensor(val, parents=(a,))

    def backward_fn(g):
        _accumulate(a, g * (1.0 - val * val))

    out.backward_fn = backward_fn
    return out


def relu(a: Tensor) -> Tensor:
    val = np.maximum(a.value, 0.0)
    out = Tensor(val, parents=(a,))

    def backward_fn(g):
        _accumulate(a, g * (a.value > 0.0))

    out.backward_fn = backward_fn
    return out


def exp(a: Tensor) -> Tensor:
    val = np.exp(a.value)
    out = Tensor(val, parents=(a,))

    def backward_fn(g):
        _accumulate(a, g * val)

    out.backward_fn = backward_fn
    return out


def log(a: Tensor) -> Tensor:
    out = Tensor(np.log(a.value), parents=(a,))

    def backward_fn(g):
        _accumulate(a, g / a.value)

    out.backward_fn = backward_fn
    return out


def minimum(a, b) -> Tensor:
    av, bv = _value(a), _value(b)
    take_a = av <= bv  # ties route to the first argument
    out = Tensor(np.where(take_a, av, bv),
                 parents=tuple(x for x in (a, b) if isinstance(x, Tensor)))

    def backward_fn(g):
        if isinstance(a, Tensor):
            _accumulate(a, g * take_a)
        if isinstance(b, Tensor):
            _accumulate(b, g * ~take_a)

    out.backward_fn = backward_fn
    return out


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    val = np.clip(a.value, lo, hi)
    inside = (a.value >= lo) & (a.value <= hi)
    out = Tensor(val, parents=(a,))

    def backward_fn(g):
        _accumulate(a, g * inside)

    out.backward_fn = backward_fn
    return out


def gather_rows(a: Tensor, indices: np.ndarray) -> Tensor:
    """Pick one column per row: out[i] = a[i, indices[i]]."""
    idx = np.asarray(indices, dtype=int)
    rows = np.arange(a.value.shape[0])
    out = Tensor(a.value[rows, idx], parents=(a,))

    def backward_fn(g):
        full = np.zeros_like(a.value)
        np.add.at(full, (rows, idx), g)
        _accumulate(a, full)

    out.backward_fn = backward_fn
    return out


def log_softmax(a: Tensor) -> Tensor:
    """Row-wise log-softmax of a (B, K) tensor."""
    shifted = a.value - a.value.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    val = shifted - log_z
    out = Tensor(val, parents=(a,))

    def backward_fn(g):
        softmax = np.exp(val)
        _accumulate(a, g - softmax * g.sum(axis=1, keepdims=True))

    out.backward_fn = backward_fn
    return out


def sum_(a: Tensor, axis=None) -> Tensor:
    out = Tensor(a.value.sum(axis=axis), parents=(a,))

    def backward_fn(g):
        if axis is None:
            _accumulate(a, np.broadcast_to(g, a.value.shape))
        else:
            _accumulate(a, np.broadcast_to(np.expand_dims(g, axis), a.value.shape))

    out.backward_fn = backward_fn
    return out


def mean(a: Tensor) -> Tensor:
    n = a.value.size
    out = Tensor(a.value.mean(), parents=(a,))

    def backward_fn(g):
        _accumulate(a, np.broadcast_to(g / n, a.value.shape))

    out.backward_fn = backward_fn
    return out


def slice1d(a: Tensor, offset: int, size: int) -> Tensor:
    out = Tensor(a.value[offset:offset + size], parents=(a,))

    def backward_fn(g):
        full = np.zeros_like(a.value)
        full[offset:offset + size] = g
        _accumulate(a, full)

    out.backward_fn = backward_fn
    return out


def reshape(a: Tensor, shape) -> Tensor:
    out = Tensor(a.value.reshape(shape), parents=(a,))

    def backward_fn(g):
        _accumulate(a, np.asarray(g).reshape(a.value.shape))

    out.backward_fn = backward_fn
    return out


def backward(loss: Tensor) -> None:
    """Accumulate gradients of a scalar loss into every reachable Tensor."""
    if loss.value.ndim != 0:
        raise ValueError("backward() requires a scalar loss")
    if not np.isfinite(loss.value):
        raise FloatingPointError("non-finite loss value")

    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))

    loss.grad = np.ones(())
    for node in reversed(order):
        if node.backward_fn is not None and node.grad is not None:
            node.backward_fn(node.grad)
