"""Immutable numpy-backed tensors with reverse-mode gradients.

Every differentiable operation returns a new `Tensor` that remembers its
parents and a vector-Jacobian product (`vjp`). `backward` walks the recorded
graph once in reverse topological order and hands back gradients keyed by
parameter name.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from ..errors import ContractError, NumericError

Vjp = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_FLOAT_TYPES = (np.float32, np.float64)


class Tensor:
    """A read-only array plus the record of the operation that produced it."""

    __slots__ = ("data", "parents", "vjp", "op", "requires_grad")

    def __init__(
        self,
        data,
        parents: tuple["Tensor", ...] = (),
        vjp: Vjp | None = None,
        op: str = "leaf",
        requires_grad: bool = False,
        copy: bool = True,
    ):
        array = np.asarray(data)
        if array.dtype not in _FLOAT_TYPES:
            array = array.astype(np.float32)
        elif copy and array is data:
            # caller keeps its own array writable; ours is frozen
            array = array.copy()
        if not np.all(np.isfinite(array)):
            raise NumericError(f"non-finite values produced by '{op}'")
        array.setflags(write=False)

        self.data: np.ndarray = array
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        # graph edges are only kept when something upstream wants a gradient
        self.parents = parents if self.requires_grad else ()
        self.vjp = vjp if self.requires_grad else None
        self.op = op

    @classmethod
    def param(cls, data) -> "Tensor":
        return cls(data, requires_grad=True)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data, op="detach")

    def astype(self, dtype) -> "Tensor":
        """Leaf copy in another float precision, keeping `requires_grad`."""
        return Tensor(self.data.astype(dtype), requires_grad=self.requires_grad)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op='{self.op}', requires_grad={self.requires_grad})"

    # operator sugar; the implementations live in functional.py
    def __add__(self, other):
        from . import functional as F

        return F.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import functional as F

        return F.sub(self, other)

    def __rsub__(self, other):
        from . import functional as F

        return F.sub(other, self)

    def __mul__(self, other):
        from . import functional as F

        return F.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import functional as F

        return F.div(self, other)

    def __rtruediv__(self, other):
        from . import functional as F

        return F.div(other, self)

    def __neg__(self):
        from . import functional as F

        return F.neg(self)

    def __pow__(self, exponent: float):
        from . import functional as F

        return F.power(self, exponent)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value, op="const")


@dataclass
class Graph:
    """Nodes reachable from `root`, inputs always listed before their users."""

    root: Tensor
    nodes: list[Tensor] = field(default_factory=list)

    @classmethod
    def trace(cls, root: Tensor) -> "Graph":
        order: list[Tensor] = []
        seen: set[int] = set()
        # iterative post-order; deep decoders would blow the recursion limit
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
            for parent in node.parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        return cls(root=root, nodes=order)


def backward(graph: Graph, wrt: Mapping[str, Tensor]) -> dict[str, np.ndarray]:
    """Gradients of the scalar `graph.root` with respect to each tensor in `wrt`.

    Tensors that do not lie on a path to the root get an all-zero gradient.
    """
    root = graph.root
    if root.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {root.shape}")

    grads: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
    for node in reversed(graph.nodes):
        upstream = grads.get(id(node))
        if upstream is None or node.vjp is None:
            continue
        for parent, contribution in zip(node.parents, node.vjp(upstream)):
            if contribution is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + contribution
            else:
                grads[key] = contribution

    result = {}
    for name, tensor in wrt.items():
        g = grads.get(id(tensor))
        if g is None:
            g = np.zeros_like(tensor.data)
        result[name] = np.asarray(g, dtype=tensor.dtype).reshape(tensor.shape)
    return result


def grad(loss: Tensor, wrt: Mapping[str, Tensor]) -> dict[str, np.ndarray]:
    return backward(Graph.trace(loss), wrt)
