"""Reverse-mode differentiable computation graph over float64 numpy arrays.

Small eager autograd: every operation returns a new Tensor holding its
value and, when gradients are enabled, a closure that scatters the output
gradient back to its parents. Graphs are built per forward pass and torn
down with it; tensors are confined to one thread for the duration of a
forward/backward pass.
"""

from __future__ import annotations

import threading
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor", "NumericFault", "no_grad", "grad_enabled", "set_debug_checks",
    "constant", "parameter", "backward",
    "add", "sub", "mul", "div", "neg", "matmul",
    "relu", "exp", "log", "sqrt", "clamp",
    "tensor_sum", "tensor_mean", "softmax", "log_softmax",
    "concat", "slice_axis", "reshape", "transpose", "broadcast_to",
    "gather_rows", "take_along_last",
]


class NumericFault(RuntimeError):
    """Raised when a non-finite value is produced by a graph operation."""


_state = threading.local()
_DEBUG_CHECKS = False


def _enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


def grad_enabled() -> bool:
    return _enabled()


class no_grad:
    """Context manager disabling graph construction (evaluation paths)."""

    def __enter__(self):
        self._prev = _enabled()
        _state.grad_enabled = False
        return self

    def __exit__(self, *exc):
        _state.grad_enabled = self._prev
        return False


def set_debug_checks(flag: bool) -> None:
    """Toggle per-operation finiteness checks (slow, for debugging)."""
    global _DEBUG_CHECKS
    _DEBUG_CHECKS = bool(flag)


class Tensor:
    """A node in the computation graph: float64 data plus optional grad."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self._op = "leaf"

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, op={self._op}, grad={self.grad is not None})"

    # Operator sugar; scalars are lifted to constant tensors.
    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __truediv__(self, other):
        return div(self, _lift(other))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _make(data: np.ndarray, parents: Sequence[Tensor], backward_fn, op: str) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out._op = op
    if _DEBUG_CHECKS and not np.all(np.isfinite(data)):
        raise NumericFault(f"non-finite value produced by operator '{op}'")
    if _enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward = None
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    """Accumulate a gradient the caller does not own (view or pass-through)."""
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64)
    else:
        t.grad += g


def _accum_owned(t: Tensor, g: np.ndarray) -> None:
    """Accumulate a freshly allocated gradient; ownership transfers on first use."""
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = g
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def backward(root: Tensor) -> None:
    """Populate .grad on every reachable requires_grad tensor with d root/d t.

    The root must be scalar (a single element). Grads accumulate, so callers
    zero parameter grads between independent passes.
    """
    if root.data.size != 1:
        raise ValueError(f"backward root must be scalar, got shape {root.data.shape}")
    if not np.all(np.isfinite(root.data)):
        raise NumericFault(f"non-finite root produced by operator '{root._op}'")
    if not root.requires_grad:
        return

    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))

    root.grad = np.ones_like(root.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# elementwise arithmetic

def _accum_ub(t: Tensor, g: np.ndarray) -> None:
    """Unbroadcast-then-accumulate for a pass-through gradient."""
    if not t.requires_grad:
        return
    gu = _unbroadcast(g, t.data.shape)
    if gu is g:
        _accum(t, gu)
    else:
        _accum_owned(t, gu)


def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data

    def bwd(g):
        _accum_ub(a, g)
        _accum_ub(b, g)

    return _make(data, (a, b), bwd, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    data = a.data - b.data

    def bwd(g):
        _accum_ub(a, g)
        if b.requires_grad:
            _accum_owned(b, _unbroadcast(-g, b.data.shape))

    return _make(data, (a, b), bwd, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data

    def bwd(g):
        if a.requires_grad:
            _accum_owned(a, _unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            _accum_owned(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(data, (a, b), bwd, "mul")


def div(a: Tensor, b: Tensor) -> Tensor:
    data = a.data / b.data

    def bwd(g):
        if a.requires_grad:
            _accum_owned(a, _unbroadcast(g / b.data, a.data.shape))
        if b.requires_grad:
            _accum_owned(b, _unbroadcast(-g * a.data / (b.data * b.data),
                                         b.data.shape))

    return _make(data, (a, b), bwd, "div")


def neg(a: Tensor) -> Tensor:
    def bwd(g):
        _accum_owned(a, -g)

    return _make(-a.data, (a,), bwd, "neg")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """np.matmul semantics for operands with ndim >= 2, leading axes broadcast."""
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ValueError("matmul operands must have ndim >= 2")

    if b.data.ndim == 2:
        # Collapse leading axes into one gemm; also yields db directly
        # without reduction over broadcast batch dims.
        k, n = b.data.shape
        a2 = a.data.reshape(-1, k)
        data = (a2 @ b.data).reshape(a.data.shape[:-1] + (n,))

        def bwd(g):
            g2 = g.reshape(-1, n)
            if a.requires_grad:
                _accum_owned(a, (g2 @ b.data.T).reshape(a.data.shape))
            if b.requires_grad:
                _accum_owned(b, a2.T @ g2)

        return _make(data, (a, b), bwd, "matmul")

    data = np.matmul(a.data, b.data)

    def bwd(g):
        if a.requires_grad:
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            _accum_owned(a, _unbroadcast(ga, a.data.shape))
        if b.requires_grad:
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
            _accum_owned(b, _unbroadcast(gb, b.data.shape))

    return _make(data, (a, b), bwd, "matmul")


# ---------------------------------------------------------------------------
# elementwise nonlinearities

def relu(a: Tensor) -> Tensor:
    # Subgradient at 0 is 0.
    data = np.maximum(a.data, 0.0)

    def bwd(g):
        _accum_owned(a, g * (a.data > 0.0))

    return _make(data, (a,), bwd, "relu")


def exp(a: Tensor) -> Tensor:
    data = np.exp(a.data)

    def bwd(g):
        _accum_owned(a, g * data)

    return _make(data, (a,), bwd, "exp")


def log(a: Tensor) -> Tensor:
    data = np.log(a.data)

    def bwd(g):
        _accum_owned(a, g / a.data)

    return _make(data, (a,), bwd, "log")


def sqrt(a: Tensor) -> Tensor:
    data = np.sqrt(a.data)

    def bwd(g):
        _accum_owned(a, g * 0.5 / data)

    return _make(data, (a,), bwd, "sqrt")


def clamp(a: Tensor, lo: float | None = None, hi: float | None = None) -> Tensor:
    """Elementwise clip; gradient passes where the input lies within [lo, hi]."""
    data = np.clip(a.data, lo, hi)
    mask = np.ones_like(a.data)
    if lo is not None:
        mask *= a.data >= lo
    if hi is not None:
        mask *= a.data <= hi

    def bwd(g):
        _accum_owned(a, g * mask)

    return _make(data, (a,), bwd, "clamp")


# ---------------------------------------------------------------------------
# reductions

def _axis_tuple(axis, ndim) -> tuple:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        return (axis % ndim,)
    return tuple(ax % ndim for ax in axis)


def tensor_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims)
    axes = _axis_tuple(axis, a.data.ndim)

    def bwd(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        _accum(a, np.broadcast_to(g, a.data.shape))

    return _make(data, (a,), bwd, "sum")


def tensor_mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = a.data.mean(axis=axis, keepdims=keepdims)
    axes = _axis_tuple(axis, a.data.ndim)
    count = 1
    for ax in axes:
        count *= a.data.shape[ax]

    def bwd(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        _accum(a, np.broadcast_to(g, a.data.shape) / count)

    return _make(data, (a,), bwd, "mean")


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        dot = (g * data).sum(axis=axis, keepdims=True)
        _accum_owned(a, data * (g - dot))

    return _make(data, (a,), bwd, "softmax")


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    m = a.data.max(axis=axis, keepdims=True)
    shifted = a.data - m
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    data = shifted - lse
    soft = np.exp(data)

    def bwd(g):
        _accum_owned(a, g - soft * g.sum(axis=axis, keepdims=True))

    return _make(data, (a,), bwd, "log_softmax")


# ---------------------------------------------------------------------------
# shape manipulation

def concat(parts: Iterable[Tensor], axis: int = -1) -> Tensor:
    parts = list(parts)
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for p, start, stop in zip(parts, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(start, stop)
            _accum(p, g[tuple(idx)])

    return _make(data, tuple(parts), bwd, "concat")


def slice_axis(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    data = a.data[idx].copy()

    def bwd(g):
        full = np.zeros_like(a.data)
        full[idx] = g
        _accum_owned(a, full)

    return _make(data, (a,), bwd, "slice")


def reshape(a: Tensor, shape) -> Tensor:
    data = a.data.reshape(shape)

    def bwd(g):
        _accum(a, g.reshape(a.data.shape))

    return _make(data, (a,), bwd, "reshape")


def transpose(a: Tensor, axes) -> Tensor:
    data = np.transpose(a.data, axes)
    inverse = np.argsort(axes)

    def bwd(g):
        _accum(a, np.transpose(g, inverse))

    return _make(data, (a,), bwd, "transpose")


def broadcast_to(a: Tensor, shape) -> Tensor:
    data = np.broadcast_to(a.data, shape).copy()

    def bwd(g):
        _accum_ub(a, g)

    return _make(data, (a,), bwd, "broadcast")


# ---------------------------------------------------------------------------
# indexing

def gather_rows(table: Tensor, idx) -> Tensor:
    """Row lookup table[idx]; gradients accumulate into the gathered rows."""
    idx = np.asarray(idx)
    if idx.size and (idx.min() < 0 or idx.max() >= table.data.shape[0]):
        raise IndexError(
            f"index out of range [0, {table.data.shape[0]}) in gather_rows"
        )
    data = table.data[idx].copy()

    def bwd(g):
        if not table.requires_grad:
            return
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        np.add.at(table.grad, idx, g)

    return _make(data, (table,), bwd, "gather_rows")


def take_along_last(a: Tensor, idx) -> Tensor:
    """Select one entry along the last axis per leading position."""
    idx = np.asarray(idx)
    expanded = np.expand_dims(idx, -1)
    if idx.size and (idx.min() < 0 or idx.max() >= a.data.shape[-1]):
        raise IndexError(f"index out of range [0, {a.data.shape[-1]}) in take_along_last")
    data = np.take_along_axis(a.data, expanded, axis=-1)[..., 0]

    def bwd(g):
        full = np.zeros_like(a.data)
        np.put_along_axis(full, expanded, np.expand_dims(g, -1), axis=-1)
        _accum_owned(a, full)

    return _make(data, (a,), bwd, "take_along_last")
