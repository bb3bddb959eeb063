"""Dense tensors with define-by-run reverse-mode differentiation.

Every op builds a fresh node that remembers its parents and a closure
mapping the output gradient to parent gradients.  ``Tensor.backward``
walks the graph in reverse topological order.

Values are float32 unless the caller explicitly passes float64 data
(used by finite-difference checks); ops preserve the input dtype.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np

from ..errors import NonFiniteError, ShapeError

DEFAULT_DTYPE = np.float32
CHECK_FINITE = True
_GRAD_ENABLED = True

_Backward = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


def _as_array(data, dtype=None) -> np.ndarray:
    if isinstance(data, np.ndarray) and dtype is None:
        if data.dtype in (np.float32, np.float64):
            return data
        return data.astype(DEFAULT_DTYPE)
    return np.asarray(data, dtype=dtype or DEFAULT_DTYPE)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: str | None = None):
        self.data = _as_array(data, dtype)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: _Backward | None = None
        self.op = "leaf"

    # -- construction helpers -------------------------------------------------
    @classmethod
    def _make(cls, data: np.ndarray, parents: Sequence["Tensor"], backward: _Backward, op: str) -> "Tensor":
        if CHECK_FINITE and not np.isfinite(data).all():
            raise NonFiniteError(f"{op} produced non-finite values")
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.name = None
        out.op = op
        out.requires_grad = _GRAD_ENABLED and any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = tuple(parents)
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    # -- graph traversal --------------------------------------------------------
    def _topo_order(self) -> list["Tensor"]:
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        return order

    def backward(self) -> None:
        """Populate ``.grad`` on every tensor upstream that requires grad."""
        if self.data.size != 1:
            raise ShapeError("backward (loss must be scalar)", self.shape, ())
        if not self.requires_grad:
            return
        order = self._topo_order()
        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                # leaf: accumulate into its buffer
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if pg.shape != parent.shape:
                    raise ShapeError(f"{node.op} backward", pg.shape, parent.shape)
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    # -- arithmetic ------------------------------------------------------------
    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return sub(self, other)

    def __mul__(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        return scale(self, -1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes) -> "Tensor":
        return transpose(self, axes)

    def sum(self) -> "Tensor":
        return sum_all(self)

    def mean(self) -> "Tensor":
        return mean_all(self)


@contextlib.contextmanager
def no_grad():
    """Evaluate ops without recording graph nodes."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _check_same(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(op, a.shape, b.shape)


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same("add", a, b)
    return Tensor._make(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same("sub", a, b)
    return Tensor._make(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same("mul", a, b)
    ad, bd = a.data, b.data
    return Tensor._make(ad * bd, (a, b), lambda g: (g * bd, g * ad), "mul")


def scale(a: Tensor, c: float) -> Tensor:
    c_ = a.data.dtype.type(c)
    return Tensor._make(a.data * c_, (a,), lambda g: (g * c_,), "scale")


def square(a: Tensor) -> Tensor:
    ad = a.data
    return Tensor._make(ad * ad, (a,), lambda g: (2 * g * ad,), "square")


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return Tensor._make(np.where(mask, a.data, 0).astype(a.dtype), (a,), lambda g: (g * mask,), "relu")


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return Tensor._make(out, (a,), lambda g: (g * out * (1 - out),), "sigmoid")


def stop_gradient(a: Tensor) -> Tensor:
    """Identity on values; contributes no gradient to ``a``."""
    out = Tensor(a.data, requires_grad=False)
    out.op = "stop_gradient"
    return out


sg = stop_gradient


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    ad, bd = a.data, b.data
    return Tensor._make(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g), "matmul")


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", a.shape, shape) from None
    src = a.shape
    return Tensor._make(out, (a,), lambda g: (g.reshape(src),), "reshape")


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    if sorted(axes) != list(range(a.data.ndim)):
        raise ShapeError("transpose", a.shape, axes)
    inv = tuple(np.argsort(axes))
    return Tensor._make(
        np.ascontiguousarray(a.data.transpose(axes)),
        (a,),
        lambda g: (np.ascontiguousarray(g.transpose(inv)),),
        "transpose",
    )


def sum_all(a: Tensor) -> Tensor:
    src = a.shape
    return Tensor._make(np.asarray(a.data.sum(), dtype=a.dtype), (a,), lambda g: (np.full(src, g, dtype=a.dtype),), "sum")


def mean_all(a: Tensor) -> Tensor:
    src, n = a.shape, a.size
    return Tensor._make(
        np.asarray(a.data.mean(), dtype=a.dtype),
        (a,),
        lambda g: (np.full(src, g / n, dtype=a.dtype),),
        "mean",
    )


def mse_reduce(pred: Tensor, target: Tensor) -> Tensor:
    """Mean of squared differences over every element."""
    _check_same("mse_reduce", pred, target)
    diff = pred.data - target.data
    n = diff.size
    val = np.asarray(np.mean(diff * diff), dtype=pred.dtype)
    return Tensor._make(val, (pred, target), lambda g: (2 * g / n * diff, -2 * g / n * diff), "mse_reduce")


def sum_squares(a: Tensor) -> Tensor:
    ad = a.data
    return Tensor._make(np.asarray(np.sum(ad * ad), dtype=a.dtype), (a,), lambda g: (2 * g * ad,), "sum_squares")


def gather_rows(table: Tensor, index: np.ndarray) -> Tensor:
    """``table[index]`` for a 2D table; gradients scatter-add back into rows."""
    index = np.asarray(index, dtype=np.int64)
    if table.data.ndim != 2:
        raise ShapeError("gather_rows", table.shape, index.shape)
    rows = table.shape

    def backward(g):
        out = np.zeros(rows, dtype=g.dtype)
        np.add.at(out, index, g)
        return (out,)

    return Tensor._make(table.data[index], (table,), backward, "gather_rows")
