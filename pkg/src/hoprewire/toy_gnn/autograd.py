"""
Minimal reverse-mode automatic differentiation on numpy float64 arrays.

Each operation returns a new ``Tensor`` holding its parents and a closure that maps the
output gradient to one gradient per parent. ``Tensor.backward`` walks the graph in reverse
topological order and accumulates gradients into every tensor that requires them.
"""

# Standard imports
from collections.abc import Callable, Sequence
from typing import Union

# Third party imports
import numpy as np

GradFn = Callable[[np.ndarray], tuple[np.ndarray | None, ...]]
Operand = Union["Tensor", np.ndarray, float, int]


class Tensor:
    """A float64 array node of the computation graph.

    Attributes:
        data: Forward value
        grad: Accumulated gradient after ``backward`` (``None`` before)
        requires_grad: Whether gradients flow into this tensor
        name: Optional label, used for parameters
    """

    def __init__(
        self,
        data: np.ndarray | float,
        requires_grad: bool = False,
        parents: tuple["Tensor", ...] = (),
        grad_fn: GradFn | None = None,
        name: str | None = None,
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self.parents = parents if self.requires_grad else ()
        self.grad_fn = grad_fn if self.requires_grad else None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Accumulate d(self)/d(x) into ``x.grad`` for every upstream x requiring grad."""
        if grad is None:
            grad = np.ones_like(self.data)
        order = _topological_order(self)
        grads: dict[int, np.ndarray] = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            node_grad = grads.pop(id(node), None)
            if node_grad is None:
                continue
            if node.grad_fn is None:
                node.grad = node_grad if node.grad is None else node.grad + node_grad
                continue
            for parent, parent_grad in zip(node.parents, node.grad_fn(node_grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = parent_grad if key not in grads else grads[key] + parent_grad

    def __add__(self, other: Operand) -> "Tensor":
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other: Operand) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: Operand) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: Operand) -> "Tensor":
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other: Operand) -> "Tensor":
        return div(self, other)

    def __rtruediv__(self, other: Operand) -> "Tensor":
        return div(other, self)

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __matmul__(self, other: Operand) -> "Tensor":
        return matmul(self, other)

    def __pow__(self, exponent: float) -> "Tensor":
        return power(self, exponent)


def _topological_order(root: Tensor) -> list[Tensor]:
    """Iterative post-order DFS; parents come before children."""
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def as_tensor(value: Operand) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(
        a.data + b.data,
        parents=(a, b),
        grad_fn=lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)),
    )


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(
        a.data - b.data,
        parents=(a, b),
        grad_fn=lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)),
    )


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(
        a.data * b.data,
        parents=(a, b),
        grad_fn=lambda g: (unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)),
    )


def div(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(
        a.data / b.data,
        parents=(a, b),
        grad_fn=lambda g: (
            unbroadcast(g / b.data, a.shape),
            unbroadcast(-g * a.data / b.data**2, b.shape),
        ),
    )


def neg(a: Tensor) -> Tensor:
    return Tensor(-a.data, parents=(a,), grad_fn=lambda g: (-g,))


def matmul(a: Operand, b: Operand) -> Tensor:
    """2-D matrix product."""
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(
        a.data @ b.data,
        parents=(a, b),
        grad_fn=lambda g: (g @ b.data.T, a.data.T @ g),
    )


def tsum(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    def grad_fn(g: np.ndarray) -> tuple[np.ndarray]:
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return Tensor(a.data.sum(axis=axis, keepdims=keepdims), parents=(a,), grad_fn=grad_fn)


def mean(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    count = a.data.size if axis is None else a.shape[axis]
    return div(tsum(a, axis=axis, keepdims=keepdims), float(max(count, 1)))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return Tensor(a.data * mask, parents=(a,), grad_fn=lambda g: (g * mask,))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return Tensor(out, parents=(a,), grad_fn=lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    return Tensor(np.log(a.data), parents=(a,), grad_fn=lambda g: (g / a.data,))


def power(a: Tensor, exponent: float) -> Tensor:
    return Tensor(
        a.data**exponent,
        parents=(a,),
        grad_fn=lambda g: (g * exponent * a.data ** (exponent - 1),),
    )


def tabs(a: Tensor) -> Tensor:
    return Tensor(np.abs(a.data), parents=(a,), grad_fn=lambda g: (g * np.sign(a.data),))


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    return Tensor(
        a.data.reshape(shape), parents=(a,), grad_fn=lambda g: (g.reshape(a.shape),)
    )


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def grad_fn(g: np.ndarray) -> tuple[np.ndarray, ...]:
        return tuple(np.split(g, splits, axis=axis))

    return Tensor(
        np.concatenate([t.data for t in tensors], axis=axis),
        parents=tuple(tensors),
        grad_fn=grad_fn,
    )


def take(a: Tensor, indices: np.ndarray) -> Tensor:
    """Gather rows ``a[indices]``."""
    indices = np.asarray(indices, dtype=np.int64)

    def grad_fn(g: np.ndarray) -> tuple[np.ndarray]:
        out = np.zeros_like(a.data)
        np.add.at(out, indices, g)
        return (out,)

    return Tensor(a.data[indices], parents=(a,), grad_fn=grad_fn)


def segment_sum(a: Tensor, segment_ids: np.ndarray, num_segments: int) -> Tensor:
    """Row sums per segment: ``out[s] = sum(a[i] for i with segment_ids[i] == s)``."""
    segment_ids = np.asarray(segment_ids, dtype=np.int64)
    out = np.zeros((num_segments, *a.shape[1:]))
    np.add.at(out, segment_ids, a.data)
    return Tensor(out, parents=(a,), grad_fn=lambda g: (g[segment_ids],))


def segment_max(a: Tensor, segment_ids: np.ndarray, num_segments: int) -> Tensor:
    """Per-segment row maximum, treated as a constant (no gradient)."""
    segment_ids = np.asarray(segment_ids, dtype=np.int64)
    out = np.full((num_segments, *a.shape[1:]), -np.inf)
    np.maximum.at(out, segment_ids, a.data)
    out[~np.isfinite(out)] = 0.0
    return Tensor(out)


def detach(a: Tensor) -> Tensor:
    return Tensor(a.data.copy())
