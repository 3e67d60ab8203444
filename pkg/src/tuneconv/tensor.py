"""Dense tensors with reverse-mode automatic differentiation.

Storage is a plain numpy array (float32 by default, float64 arrays are kept
as-is so gradient checks can recompute in double precision). Every operation
returns a fresh Tensor and records a backward rule on the graph; ``backward``
walks the recorded nodes once in reverse topological order.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Optional, Sequence

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible. Names the offending axis."""


class DomainError(ValueError):
    """Raised when a value is outside an operation's domain (e.g. empty input)."""


_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference / target building)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _as_float_array(data) -> np.ndarray:
    arr = np.asarray(data)
    if arr.dtype == np.float64 or arr.dtype == np.float32:
        return arr
    return arr.astype(np.float32)


class Tensor:
    """A value-semantic dense array that may participate in the autodiff tape."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_float_array(data)
        self.requires_grad = bool(requires_grad) and _grad_enabled
        self.grad: Optional[np.ndarray] = None
        self._parents: tuple = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() requires a scalar, got shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # operator sugar; the module-level functions are the canonical API
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)


def _result(data: np.ndarray, parents: Sequence[Tensor],
            backward: Callable[[np.ndarray], None]) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _check_same_shape(a: Tensor, b: Tensor, op: str):
    if a.shape != b.shape:
        for axis, (da, db) in enumerate(zip(a.shape, b.shape)):
            if da != db:
                raise ShapeError(
                    f"{op}: axis {axis} mismatch ({da} vs {db}); "
                    f"shapes {a.shape} vs {b.shape}")
        raise ShapeError(f"{op}: rank mismatch, shapes {a.shape} vs {b.shape}")


# ---------------------------------------------------------------------------
# elementwise

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "add")

    def bw(g):
        _accum(a, g)
        _accum(b, g)

    return _result(a.data + b.data, (a, b), bw)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "sub")

    def bw(g):
        _accum(a, g)
        _accum(b, -g)

    return _result(a.data - b.data, (a, b), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "mul")

    def bw(g):
        _accum(a, g * b.data)
        _accum(b, g * a.data)

    return _result(a.data * b.data, (a, b), bw)


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)

    def bw(g):
        _accum(a, g * s)

    return _result(a.data * np.asarray(s, dtype=a.dtype), (a,), bw)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def bw(g):
        _accum(a, g * mask)

    return _result(np.where(mask, a.data, 0), (a,), bw)


def absval(a: Tensor) -> Tensor:
    sign = np.sign(a.data)

    def bw(g):
        _accum(a, g * sign)

    return _result(np.abs(a.data), (a,), bw)


# ---------------------------------------------------------------------------
# reductions and shape ops

def total(a: Tensor) -> Tensor:
    """Sum of all entries, as a scalar tensor."""
    if a.data.size == 0:
        raise DomainError("sum of an empty tensor")

    def bw(g):
        _accum(a, np.broadcast_to(g, a.shape))

    return _result(np.asarray(a.data.sum(), dtype=a.dtype), (a,), bw)


def mean(a: Tensor) -> Tensor:
    if a.data.size == 0:
        raise DomainError("mean of an empty tensor")
    n = a.data.size

    def bw(g):
        _accum(a, np.broadcast_to(g / n, a.shape).astype(a.dtype))

    return _result(np.asarray(a.data.mean(), dtype=a.dtype), (a,), bw)


def global_avg_pool(x: Tensor) -> Tensor:
    """Average over the spatial axes of an (n, c, h, w) tensor -> (n, c, 1, 1)."""
    if x.data.ndim != 4:
        raise ShapeError(f"global_avg_pool expects 4-d input, got {x.shape}")
    n, c, h, w = x.shape
    if h * w == 0:
        raise DomainError("global_avg_pool of an empty spatial extent")

    def bw(g):
        _accum(x, np.broadcast_to(g / (h * w), x.shape).astype(x.dtype))

    return _result(x.data.mean(axis=(2, 3), keepdims=True), (x,), bw)


def reshape(a: Tensor, shape) -> Tensor:
    def bw(g):
        _accum(a, g.reshape(a.shape))

    return _result(a.data.reshape(shape), (a,), bw)


def concat0(parts: Sequence[Tensor]) -> Tensor:
    """Concatenate along axis 0 (used to reassemble per-item batches)."""
    sizes = [p.shape[0] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            _accum(p, g[lo:hi])

    return _result(np.concatenate([p.data for p in parts], axis=0), tuple(parts), bw)


def take0(a: Tensor, i: int) -> Tensor:
    """Slice one index along axis 0, keeping the axis (length 1)."""

    def bw(g):
        full = np.zeros_like(a.data)
        full[i:i + 1] = g
        _accum(a, full)

    return _result(a.data[i:i + 1].copy(), (a,), bw)


# ---------------------------------------------------------------------------
# linear algebra

def affine(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """y = x @ weight.T + bias for x of shape (in,) or (batch, in)."""
    in_dim = weight.shape[1]
    if x.shape[-1] != in_dim:
        raise ShapeError(
            f"affine: last axis of input is {x.shape[-1]}, weight expects {in_dim}")
    if bias.shape != (weight.shape[0],):
        raise ShapeError(
            f"affine: bias shape {bias.shape} does not match output dim {weight.shape[0]}")

    y = x.data @ weight.data.T + bias.data

    def bw(g):
        if x.data.ndim == 1:
            _accum(weight, np.outer(g, x.data))
            _accum(bias, g)
            _accum(x, g @ weight.data)
        else:
            _accum(weight, g.T @ x.data)
            _accum(bias, g.sum(axis=0))
            _accum(x, g @ weight.data)

    return _result(y, (x, weight, bias), bw)


def softmax(a: Tensor) -> Tensor:
    """Normalized exponential over the last axis."""
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)

    def bw(g):
        dot = (g * s).sum(axis=-1, keepdims=True)
        _accum(a, (s * (g - dot)).astype(a.dtype))

    return _result(s, (a,), bw)


def weighted_sum(alpha: Tensor, stack: Tensor) -> Tensor:
    """sum_i alpha[i] * stack[i] for alpha (p,) and stack (p, ...)."""
    if alpha.data.ndim != 1:
        raise ShapeError(f"weighted_sum: alpha must be a vector, got {alpha.shape}")
    if alpha.shape[0] != stack.shape[0]:
        raise ShapeError(
            f"weighted_sum: axis 0 mismatch ({alpha.shape[0]} weights for "
            f"{stack.shape[0]} stacked tensors)")

    out = np.tensordot(alpha.data, stack.data, axes=1)

    def bw(g):
        _accum(alpha, np.tensordot(stack.data, g, axes=(tuple(range(1, stack.data.ndim)),
                                                        tuple(range(g.ndim)))))
        shape = (alpha.shape[0],) + (1,) * g.ndim
        _accum(stack, alpha.data.reshape(shape) * g[None])

    return _result(out, (alpha, stack), bw)


# ---------------------------------------------------------------------------
# backward pass

def _accum(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    g = np.asarray(g, dtype=t.dtype)
    if t.grad is None:
        t.grad = g.reshape(t.shape).copy()
    else:
        t.grad = t.grad + g.reshape(t.shape)


def backward(loss: Tensor):
    """Populate ``.grad`` on every reachable tensor with requires_grad set.

    The seed must be a scalar. Each node's rule runs exactly once, after all
    of its consumers.
    """
    if loss.data.size != 1:
        raise DomainError(f"backward seed must be scalar, got shape {loss.shape}")

    order: list[Tensor] = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))

    for node in order:
        if node.requires_grad:
            node.grad = None

    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)

    # leaves that never received a contribution get explicit zeros
    for node in order:
        if node.requires_grad and node.grad is None:
            node.grad = np.zeros_like(node.data)


def zero_grads(tensors: Iterable[Tensor]):
    for t in tensors:
        t.grad = None
