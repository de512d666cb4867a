"""Dense tensor with reverse-mode automatic differentiation.

Every op records its inputs and a backward closure on the output tensor.
``Tensor.backward`` replays the recorded graph in reverse creation order,
which is a valid reverse topological order because a node is always created
after its inputs.
"""
from __future__ import annotations

import itertools
from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np

_ids = itertools.count()
_grad_enabled = True

FLOAT_DTYPES = (np.dtype(np.float64), np.dtype(np.float32))


class NonFiniteError(FloatingPointError):
    """Raised when a forward or backward pass produces NaN or Inf."""


@contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def is_grad_enabled() -> bool:
    return _grad_enabled


def _check_finite(arr: np.ndarray, where: str) -> None:
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"{where}: non-finite values")


def _as_float_array(data, dtype=None) -> np.ndarray:
    if dtype is not None:
        return np.array(data, dtype=dtype)
    if isinstance(data, np.ndarray) and data.dtype in FLOAT_DTYPES:
        return data.copy()
    return np.array(data, dtype=np.float64)


class Tensor:
    """n-dimensional float array with an optional gradient accumulator.

    Leaves created with ``requires_grad=True`` carry a same-shape ``grad``
    array that ``backward`` accumulates into. Intermediate results carry no
    accumulator.
    """

    __slots__ = ("data", "requires_grad", "grad", "op", "_parents", "_backward", "_id")
    __array_priority__ = 1000

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = _as_float_array(data, dtype)
        _check_finite(self.data, "Tensor")
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(self.data) if requires_grad else None
        self.op = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None
        self._id = next(_ids)

    # -- construction helpers -------------------------------------------
    @classmethod
    def _from_op(cls, data: np.ndarray, parents: Sequence["Tensor"], backward: Callable, op: str) -> "Tensor":
        _check_finite(data, op)
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.op = op
        out._id = next(_ids)
        track = _grad_enabled and any(p.requires_grad for p in parents)
        out.requires_grad = track
        out._parents = tuple(parents) if track else ()
        out._backward = backward if track else None
        return out

    # -- array-like surface ----------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return self.data.item()

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, op={self.op!r})"

    def __len__(self) -> int:
        return self.shape[0]

    # -- autodiff ----------------------------------------------------------
    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``grad``."""
        if self.data.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            raise ValueError("backward on a tensor that does not require grad")
        grads: dict[int, np.ndarray] = {self._id: np.ones_like(self.data)}
        for node in Tape.from_root(self).nodes:
            g = grads.pop(node._id, None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = node.grad + g if node.grad is not None else np.array(g)
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                _check_finite(pg, f"{node.op} backward")
                prev = grads.get(parent._id)
                grads[parent._id] = pg if prev is None else prev + pg

    # -- operators ----------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return add(neg(self), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("tensor / tensor is not supported; divide by a scalar")
        return mul(self, 1.0 / other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def sum(self, axis=None):
        return tsum(self, axis)

    def mean(self, axis=None):
        return mean(self, axis)

    def log(self):
        return log(self)

    def tanh(self):
        return tanh(self)

    def sigmoid(self):
        return sigmoid(self)


class Tape:
    """Nodes reachable from a root, in reverse creation order."""

    def __init__(self, nodes: list[Tensor]):
        self.nodes = nodes

    @classmethod
    def from_root(cls, root: Tensor) -> "Tape":
        seen: dict[int, Tensor] = {}
        stack = [root]
        while stack:
            node = stack.pop()
            if node._id in seen or not node.requires_grad:
                continue
            seen[node._id] = node
            stack.extend(node._parents)
        return cls(sorted(seen.values(), key=lambda t: t._id, reverse=True))

    def __len__(self) -> int:
        return len(self.nodes)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _is_scalar(x) -> bool:
    return isinstance(x, (int, float, np.floating, np.integer))


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# -- elementwise --------------------------------------------------------------

def add(a, b) -> Tensor:
    if _is_scalar(b):
        return Tensor._from_op(a.data + b, (a,), lambda g: (g,), "add_scalar")
    if _is_scalar(a):
        return add(b, a)
    _same_shape("add", a, b)
    return Tensor._from_op(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a, b) -> Tensor:
    if _is_scalar(b):
        return add(a, -b)
    _same_shape("sub", a, b)
    return Tensor._from_op(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def neg(a: Tensor) -> Tensor:
    return Tensor._from_op(-a.data, (a,), lambda g: (-g,), "neg")


def mul(a, b) -> Tensor:
    if _is_scalar(b):
        return Tensor._from_op(a.data * b, (a,), lambda g: (g * b,), "mul_scalar")
    if _is_scalar(a):
        return mul(b, a)
    _same_shape("mul", a, b)
    ad, bd = a.data, b.data
    return Tensor._from_op(ad * bd, (a, b), lambda g: (g * bd, g * ad), "mul")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    ad, bd = a.data, b.data
    return Tensor._from_op(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g), "matmul")


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """Add a per-channel bias ``b`` of shape (C,) along axis 1 of ``x``."""
    if b.ndim != 1 or x.ndim < 2 or x.shape[1] != b.shape[0]:
        raise ValueError(f"add_bias: bias {b.shape} does not fit input {x.shape}")
    view = (1, -1) + (1,) * (x.ndim - 2)
    reduce_axes = (0,) + tuple(range(2, x.ndim))
    return Tensor._from_op(
        x.data + b.data.reshape(view), (x, b), lambda g: (g, g.sum(axis=reduce_axes)), "add_bias"
    )


def pointwise(x: Tensor, f: Callable, df: Callable, name: str = "pointwise") -> Tensor:
    """Apply a scalar function elementwise; ``df`` is its derivative."""
    xd = x.data
    return Tensor._from_op(np.asarray(f(xd), dtype=xd.dtype), (x,), lambda g: (g * df(xd),), name)


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return Tensor._from_op(y, (x,), lambda g: (g * (1.0 - y * y),), "tanh")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -x)).astype(x.dtype, copy=False)


def sigmoid(x: Tensor) -> Tensor:
    y = _sigmoid(x.data)
    return Tensor._from_op(y, (x,), lambda g: (g * y * (1.0 - y),), "sigmoid")


def arctan(x: Tensor) -> Tensor:
    xd = x.data
    return Tensor._from_op(np.arctan(xd), (x,), lambda g: (g / (1.0 + xd * xd),), "arctan")


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    xd = x.data
    pos = xd > 0
    return Tensor._from_op(np.where(pos, xd, slope * xd), (x,), lambda g: (np.where(pos, g, slope * g),), "leaky_relu")


def relu(x: Tensor) -> Tensor:
    return leaky_relu(x, 0.0)


def tabs(x: Tensor) -> Tensor:
    # subgradient 0 at 0
    xd = x.data
    return Tensor._from_op(np.abs(xd), (x,), lambda g: (g * np.sign(xd),), "abs")


def log(x: Tensor) -> Tensor:
    xd = x.data
    if not (xd > 0).all():
        raise ValueError("log: non-positive input; clamp before taking logs")
    return Tensor._from_op(np.log(xd), (x,), lambda g: (g / xd,), "log")


def clamp(x: Tensor, lo: float, hi: float) -> Tensor:
    xd = x.data
    inside = (xd >= lo) & (xd <= hi)
    return Tensor._from_op(np.clip(xd, lo, hi), (x,), lambda g: (g * inside,), "clamp")


# -- shape ----------------------------------------------------------------------

def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    old = x.shape
    try:
        out = x.data.reshape(shape)
    except ValueError as exc:
        raise ValueError(f"reshape: cannot view {old} as {tuple(shape)}") from exc
    return Tensor._from_op(out, (x,), lambda g: (g.reshape(old),), "reshape")


def flip(x: Tensor, axis) -> Tensor:
    return Tensor._from_op(np.flip(x.data, axis).copy(), (x,), lambda g: (np.flip(g, axis).copy(),), "flip")


def concat(tensors: Iterable[Tensor], axis: int = 0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ValueError("concat: nothing to concatenate")
    rest = [t.shape[:axis] + t.shape[axis + 1:] for t in tensors]
    if any(r != rest[0] for r in rest):
        raise ValueError(f"concat: incompatible shapes {[t.shape for t in tensors]}")
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor._from_op(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward, "concat")


# -- reductions -----------------------------------------------------------------

def _norm_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def tsum(x: Tensor, axis=None) -> Tensor:
    shape = x.shape
    axes = _norm_axes(axis, x.ndim)

    def backward(g):
        return (np.broadcast_to(np.expand_dims(g, axes), shape),)

    return Tensor._from_op(np.asarray(x.data.sum(axis=axes)), (x,), backward, "sum")


def mean(x: Tensor, axis=None) -> Tensor:
    axes = _norm_axes(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    if count == 0:
        raise ValueError("mean of an empty tensor")
    return mul(tsum(x, axis), 1.0 / count)
