"""Dense float64 tensors with a dynamically recorded reverse-mode graph."""
from __future__ import annotations

import contextlib
from typing import Any, Optional, Sequence

import numpy as np

from ..errors import GraphReuseError, ShapeError

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (evaluation with frozen weights)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED


def unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape``, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Function:
    """One recorded operation: forward on arrays, backward on the output grad.

    ``backward`` returns one gradient (or ``None``) per input tensor.
    """

    def __init__(self, *inputs: "Tensor"):
        self.inputs = inputs

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        raise NotImplementedError

    @classmethod
    def apply(cls, *inputs: Any, **kwargs: Any) -> "Tensor":
        tensors = tuple(as_tensor(x) for x in inputs)
        fn = cls(*tensors)
        out = fn.forward(*(t.data for t in tensors), **kwargs)
        track = _GRAD_ENABLED and any(t.requires_grad for t in tensors)
        return Tensor(out, requires_grad=track, _ctx=fn if track else None)


class Tensor:
    """A float64 array that may participate in the gradient graph.

    Leaves created with ``requires_grad=True`` receive ``.grad`` after
    :meth:`backward`. Intermediate tensors keep a reference to the
    :class:`Function` that produced them.
    """

    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None, _ctx=None):
        arr = np.asarray(data, dtype=np.float64)
        if not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._ctx = _ctx
        self._released = False

    # -- array protocol -------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._ctx is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __len__(self) -> int:
        return self.data.shape[0]

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({np.array2string(self.data, precision=4)}{flag})"

    # -- autodiff -------------------------------------------------------
    def backward(self) -> None:
        """Propagate d(self)/d(leaf) into every reachable leaf's ``.grad``.

        Gradients accumulate into existing ``.grad`` buffers. The graph is
        released afterwards; a second call raises :class:`GraphReuseError`.
        """
        if self.data.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {self.shape}")
        if self._released:
            raise GraphReuseError("graph already consumed by a previous backward()")
        order = tape(self)
        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            fn = node._ctx
            if fn is None:
                if node.requires_grad:
                    if g is None:
                        g = np.zeros_like(node.data)
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            if g is None:
                continue
            for inp, ig in zip(fn.inputs, fn.backward(g)):
                if ig is None or not inp.requires_grad:
                    continue
                if ig.shape != inp.shape:
                    ig = unbroadcast(ig, inp.shape)
                prev = grads.get(id(inp))
                grads[id(inp)] = ig if prev is None else prev + ig
        for node in order:
            if node._ctx is not None:
                node._released = True
        self._released = True


def tape(root: Tensor) -> list:
    """Topologically ordered list of the tensors ``root`` depends on.

    Inputs always precede the tensors computed from them; ``root`` is last.
    """
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        if node._ctx is not None:
            for inp in reversed(node._ctx.inputs):
                if inp.requires_grad and id(inp) not in seen:
                    stack.append((inp, False))
    return order


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def tensor(data, requires_grad: bool = False, name: Optional[str] = None) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=requires_grad, name=name)
