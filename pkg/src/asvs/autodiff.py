"""Tape-based reverse-mode differentiation over numpy arrays.

Every node records its parents and a closure mapping the upstream gradient to
one gradient per parent.  ``Tensor.backward`` walks the graph in reverse
topological order and sums gradients arriving along different paths.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, DimensionError, VocabularyError

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Build no graph inside the block."""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


def is_grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if dtype is None and not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        self.data: np.ndarray = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None

    # -- introspection -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def __len__(self) -> int:
        return len(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    # -- graph traversal -----------------------------------------------
    def backward(self, grad=None) -> None:
        if not self.requires_grad:
            raise RuntimeError("backward() on a tensor that does not require grad")
        if grad is None:
            if self.data.size != 1:
                raise DimensionError(f"implicit gradient needs a scalar output, got shape {self.shape}")
            grad = np.ones_like(self.data)
        order = _topological_order(self)
        grads: dict[int, np.ndarray] = {id(self): np.asarray(grad, dtype=self.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            node.grad = g
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    # -- operators -----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(_lift(other, self.dtype)))

    def __rsub__(self, other):
        return add(_lift(other, self.dtype), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division is only defined by a constant")
        return mul(self, 1.0 / other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return slice_(self, index)

    @property
    def T(self) -> Tensor:
        return transpose(self)


class Parameter(Tensor):
    """Trainable leaf tensor with Adam moment buffers."""

    def __init__(self, data, name: str = "", dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype)
        self.name = name
        self.m = np.zeros_like(self.data)
        self.v = np.zeros_like(self.data)
        self.step = 0

    def astype(self, dtype) -> None:
        self.data = self.data.astype(dtype)
        self.m = self.m.astype(dtype)
        self.v = self.v.astype(dtype)
        if self.grad is not None:
            self.grad = self.grad.astype(dtype)

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape}, dtype={self.dtype})"


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def _lift(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype if dtype is not None else np.float64))


def _node(data: np.ndarray, parents: Sequence[Tensor], backward: Callable) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# -- elementwise ---------------------------------------------------------

def add(a, b) -> Tensor:
    a = _lift(a)
    b = _lift(b, a.dtype)
    sa, sb = a.shape, b.shape
    return _node(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def neg(a: Tensor) -> Tensor:
    return _node(-a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a = _lift(a)
    if not isinstance(b, Tensor):
        c = np.asarray(b, dtype=a.dtype)
        return _node(a.data * c, (a,), lambda g: (_unbroadcast(g * c, a.shape),))
    ad, bd = a.data, b.data
    return _node(
        ad * bd,
        (a, b),
        lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)),
    )


def sigmoid(a: Tensor) -> Tensor:
    y = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _node(y, (a,), lambda g: (g * y * (1.0 - y),))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _node(np.where(mask, a.data, 0).astype(a.dtype), (a,), lambda g: (g * mask,))


def log(a: Tensor) -> Tensor:
    x = a.data
    return _node(np.log(x), (a,), lambda g: (g / x,))


def abs_(a: Tensor) -> Tensor:
    s = np.sign(a.data)
    return _node(np.abs(a.data), (a,), lambda g: (g * s,))


def softplus(a: Tensor) -> Tensor:
    """log(1 + exp(x)), evaluated without overflow."""
    x = a.data
    y = np.maximum(x, 0) + np.log1p(np.exp(-np.abs(x)))
    s = 0.5 * (1.0 + np.tanh(0.5 * x))
    return _node(y, (a,), lambda g: (g * s,))


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    x = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(x)
    y = e / e.sum(axis=axis, keepdims=True)
    return _node(y, (a,), lambda g: (y * (g - (g * y).sum(axis=axis, keepdims=True)),))


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    x = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(x).sum(axis=axis, keepdims=True))
    y = x - lse
    p = np.exp(y)
    return _node(y, (a,), lambda g: (g - p * g.sum(axis=axis, keepdims=True),))


# -- reductions and shape ------------------------------------------------

def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    shape = a.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _node(np.asarray(a.data.sum(axis=axis, keepdims=keepdims)), (a,), backward)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = a.data.size if axis is None else a.shape[axis]
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / n)


def reshape(a: Tensor, shape) -> Tensor:
    old = a.shape
    return _node(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise DimensionError(f"transpose expects a 2-D tensor, got shape {a.shape}")
    return _node(a.data.T, (a,), lambda g: (g.T,))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [_lift(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)
    data = np.concatenate([t.data for t in tensors], axis=axis)

    def backward(g):
        return tuple(np.take(g, np.arange(lo, hi), axis=axis) for lo, hi in zip(bounds[:-1], bounds[1:]))

    return _node(data, tensors, backward)


def slice_(a: Tensor, index) -> Tensor:
    shape, dtype = a.shape, a.dtype

    def backward(g):
        full = np.zeros(shape, dtype=dtype)
        np.add.at(full, index, g)
        return (full,)

    return _node(a.data[index], (a,), backward)


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Rows of ``table`` selected by integer ``ids``; gradients scatter-add."""
    ids = np.asarray(ids)
    if not np.issubdtype(ids.dtype, np.integer):
        raise TypeError(f"embedding ids must be integers, got {ids.dtype}")
    bad = ids[(ids < 0) | (ids >= table.shape[0])]
    if bad.size:
        raise VocabularyError(f"index {int(bad.flat[0])} outside table of {table.shape[0]} rows")
    shape, dtype = table.shape, table.dtype

    def backward(g):
        full = np.zeros(shape, dtype=dtype)
        np.add.at(full, ids, g)
        return (full,)

    return _node(table.data[ids], (table,), backward)


# -- linear algebra ------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply shapes {a.shape} and {b.shape}")
    ad, bd = a.data, b.data
    return _node(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g))


def conv1d(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Same-padded 1-D cross-correlation.

    x: [channels_in, time], w: [channels_out, channels_in, kernel], b: [channels_out].
    """
    c_out, c_in, k = w.shape
    if k % 2 == 0:
        raise ConfigurationError(f"conv1d needs an odd kernel, got {k}")
    if x.ndim != 2 or x.shape[0] != c_in:
        raise DimensionError(f"conv1d input {x.shape} does not match weight {w.shape}")
    t = x.shape[1]
    pad = k // 2
    xp = np.pad(x.data, ((0, 0), (pad, pad)))
    cols = np.stack([xp[:, i:i + t] for i in range(k)], axis=1).reshape(c_in * k, t)
    w2 = w.data.reshape(c_out, c_in * k)
    out = w2 @ cols
    if b is not None:
        out = out + b.data[:, None]

    def backward(g):
        gw = (g @ cols.T).reshape(w.shape)
        gcols = (w2.T @ g).reshape(c_in, k, t)
        gxp = np.zeros_like(xp)
        for i in range(k):
            gxp[:, i:i + t] += gcols[:, i]
        gx = gxp[:, pad:pad + t]
        if b is None:
            return gx, gw
        return gx, gw, g.sum(axis=1)

    parents = (x, w) if b is None else (x, w, b)
    return _node(out, parents, backward)


# -- training-only helpers -----------------------------------------------

def dropout(a: Tensor, p: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout; the identity (same object) outside training."""
    if not training or p <= 0.0:
        return a
    if rng is None:
        rng = np.random.default_rng()
    mask = (rng.random(a.shape) >= p).astype(a.dtype) / (1.0 - p)
    return _node(a.data * mask, (a,), lambda g: (g * mask,))


def gradient_reversal(x: Tensor, lambda_grl: float = 1.0) -> Tensor:
    """Identity forward; multiplies the backward gradient by ``-lambda_grl``."""
    if lambda_grl < 0:
        raise ConfigurationError(f"lambda_grl must be nonnegative, got {lambda_grl}")
    scale = -float(lambda_grl)
    return _node(x.data, (x,), lambda g: (g * scale,))


def stack_scalars(values: Iterable[Tensor]) -> Tensor:
    return concat([reshape(v, (1,)) for v in values], axis=0)
