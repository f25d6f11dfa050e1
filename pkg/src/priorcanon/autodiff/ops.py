"""Differentiable operations on :class:`Tensor`.

Binary elementwise ops follow numpy broadcasting; gradients are summed back
to the operand shapes.
"""
from __future__ import annotations

from typing import Optional, Sequence, Union

import numpy as np

from .. import _kernels
from ..errors import DomainError, ShapeError
from .tensor import Function, Tensor, as_tensor

Axes = Union[None, int, Sequence[int]]


def _first_index(mask: np.ndarray):
    return tuple(int(i) for i in np.unravel_index(int(np.argmax(mask)), mask.shape))


def _check_broadcast(a: np.ndarray, b: np.ndarray) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"shapes {a.shape} and {b.shape} do not broadcast") from None


# -- elementwise ----------------------------------------------------------

class Add(Function):
    def forward(self, a, b):
        _check_broadcast(a, b)
        return a + b

    def backward(self, g):
        return g, g


class Sub(Function):
    def forward(self, a, b):
        _check_broadcast(a, b)
        return a - b

    def backward(self, g):
        return g, -g


class Mul(Function):
    def forward(self, a, b):
        _check_broadcast(a, b)
        self.a, self.b = a, b
        return a * b

    def backward(self, g):
        return g * self.b, g * self.a


class Div(Function):
    def forward(self, a, b):
        _check_broadcast(a, b)
        zero = b == 0
        if zero.any():
            raise DomainError("division by zero", _first_index(zero))
        self.a, self.b = a, b
        return a / b

    def backward(self, g):
        return g / self.b, -g * self.a / (self.b * self.b)


class Neg(Function):
    def forward(self, a):
        return -a

    def backward(self, g):
        return (-g,)


class Exp(Function):
    def forward(self, a):
        self.out = np.exp(a)
        return self.out

    def backward(self, g):
        return (g * self.out,)


class Log(Function):
    def forward(self, a):
        bad = a <= 0
        if bad.any():
            raise DomainError("log of non-positive value", _first_index(bad))
        self.a = a
        return np.log(a)

    def backward(self, g):
        return (g / self.a,)


class Relu(Function):
    def forward(self, a):
        self.mask = a > 0
        return np.maximum(a, 0.0)  # propagates NaN so divergence is not masked

    def backward(self, g):
        return (g * self.mask,)


class Sqrt(Function):
    def forward(self, a):
        bad = a < 0
        if bad.any():
            raise DomainError("sqrt of negative value", _first_index(bad))
        self.out = np.sqrt(a)
        return self.out

    def backward(self, g):
        return (g / (2.0 * self.out),)


class Tanh(Function):
    def forward(self, a):
        self.out = np.tanh(a)
        return self.out

    def backward(self, g):
        return (g * (1.0 - self.out * self.out),)


class PowScalar(Function):
    def forward(self, a, p=2.0):
        self.a, self.p = a, p
        return a ** p

    def backward(self, g):
        return (g * self.p * self.a ** (self.p - 1),)


_UNARY = {"neg": Neg, "exp": Exp, "log": Log, "relu": Relu, "sqrt": Sqrt, "tanh": Tanh}
_BINARY = {"add": Add, "sub": Sub, "mul": Mul, "div": Div}


def elementwise(op_kind: str, a, b=None) -> Tensor:
    """Dispatch an elementwise op by name (``add``, ``sub``, ``mul``, ``div``,
    ``neg``, ``exp``, ``log``, ``relu``; also ``sqrt``, ``tanh``)."""
    if op_kind in _BINARY:
        if b is None:
            raise ValueError(f"{op_kind} needs two operands")
        return _BINARY[op_kind].apply(a, b)
    if op_kind in _UNARY:
        if b is not None:
            raise ValueError(f"{op_kind} takes one operand")
        return _UNARY[op_kind].apply(a)
    raise ValueError(f"unknown elementwise op {op_kind!r}")


def add(a, b): return Add.apply(a, b)
def sub(a, b): return Sub.apply(a, b)
def mul(a, b): return Mul.apply(a, b)
def div(a, b): return Div.apply(a, b)
def neg(a): return Neg.apply(a)
def exp(a): return Exp.apply(a)
def log(a): return Log.apply(a)
def relu(a): return Relu.apply(a)
def sqrt(a): return Sqrt.apply(a)
def tanh(a): return Tanh.apply(a)
def power(a, p: float): return PowScalar.apply(a, p=float(p))


# -- linear algebra --------------------------------------------------------

class MatMul(Function):
    def forward(self, a, b):
        if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
            raise ShapeError(f"matmul dimension mismatch {a.shape} @ {b.shape}")
        self.a, self.b = a, b
        return np.matmul(a, b)

    def backward(self, g):
        ga = np.matmul(g, np.swapaxes(self.b, -1, -2))
        gb = np.matmul(np.swapaxes(self.a, -1, -2), g)
        return unbroadcast_batch(ga, self.a.shape), unbroadcast_batch(gb, self.b.shape)


def unbroadcast_batch(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def matmul(a, b) -> Tensor:
    """Matrix product; leading axes broadcast as in ``np.matmul``."""
    return MatMul.apply(a, b)


# -- shape manipulation ----------------------------------------------------

class Reshape(Function):
    def forward(self, a, shape=()):
        self.in_shape = a.shape
        return a.reshape(shape)

    def backward(self, g):
        return (g.reshape(self.in_shape),)


class Transpose(Function):
    def forward(self, a, axes=None):
        self.axes = tuple(range(a.ndim))[::-1] if axes is None else tuple(axes)
        return np.ascontiguousarray(np.transpose(a, self.axes))

    def backward(self, g):
        return (np.transpose(g, np.argsort(self.axes)),)


class GetItem(Function):
    def forward(self, a, index=None):
        self.shape, self.index = a.shape, index
        return np.array(a[index], dtype=np.float64)

    def backward(self, g):
        out = np.zeros(self.shape)
        np.add.at(out, self.index, g)
        return (out,)


class Stack(Function):
    def forward(self, *arrays, axis=0):
        self.axis = axis
        return np.stack(arrays, axis=axis)

    def backward(self, g):
        return tuple(np.take(g, i, axis=self.axis) for i in range(g.shape[self.axis]))


class Concat(Function):
    def forward(self, *arrays, axis=0):
        self.axis = axis
        self.splits = np.cumsum([a.shape[axis] for a in arrays])[:-1]
        return np.concatenate(arrays, axis=axis)

    def backward(self, g):
        return tuple(np.split(g, self.splits, axis=self.axis))


def reshape(a, *shape) -> Tensor:
    if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
        shape = tuple(shape[0])
    return Reshape.apply(a, shape=shape)


def transpose(a, axes=None) -> Tensor:
    return Transpose.apply(a, axes=axes)


def getitem(a, index) -> Tensor:
    return GetItem.apply(a, index=index)


def stack(tensors, axis: int = 0) -> Tensor:
    return Stack.apply(*tensors, axis=axis)


def concat(tensors, axis: int = 0) -> Tensor:
    return Concat.apply(*tensors, axis=axis)


# -- reductions ------------------------------------------------------------

def _norm_axes(axes: Axes, ndim: int):
    if axes is None:
        return tuple(range(ndim))
    if isinstance(axes, int):
        axes = (axes,)
    out = []
    for ax in axes:
        if not -ndim <= ax < ndim:
            raise ShapeError(f"axis {ax} out of range for {ndim}-d tensor")
        out.append(ax % ndim)
    return tuple(sorted(set(out)))


class Sum(Function):
    def forward(self, a, axes=None, keepdims=False):
        self.shape = a.shape
        self.axes = _norm_axes(axes, a.ndim)
        self.keepdims = keepdims
        for ax in self.axes:
            if a.shape[ax] == 0:
                raise ShapeError("empty reduction axis")
        return np.asarray(a.sum(axis=self.axes, keepdims=keepdims))

    def backward(self, g):
        if not self.keepdims:
            g = np.expand_dims(g, self.axes)
        return (np.broadcast_to(g, self.shape).copy(),)


class Mean(Sum):
    def forward(self, a, axes=None, keepdims=False):
        out = super().forward(a, axes, keepdims)
        self.count = int(np.prod([a.shape[ax] for ax in self.axes])) if self.axes else 1
        return out / self.count

    def backward(self, g):
        return (super().backward(g)[0] / self.count,)


class MaxReduce(Function):
    """Max over one axis; the argmax (first index on ties) is kept on ``self.argmax``."""

    def forward(self, a, axis=-1, keepdims=False):
        if a.shape[axis] == 0:
            raise ShapeError("empty reduction axis")
        self.shape, self.axis = a.shape, axis % a.ndim
        self.argmax = np.argmax(a, axis=self.axis)
        vals = np.take_along_axis(a, np.expand_dims(self.argmax, self.axis), axis=self.axis)
        self.keepdims = keepdims
        return vals if keepdims else np.squeeze(vals, axis=self.axis)

    def backward(self, g):
        if not self.keepdims:
            g = np.expand_dims(g, self.axis)
        out = np.zeros(self.shape)
        np.put_along_axis(out, np.expand_dims(self.argmax, self.axis), g, axis=self.axis)
        return (out,)


def reduce(op_kind: str, a, axes: Axes = None, keepdims: bool = False):
    """Reduce ``a`` over ``axes``.

    ``op_kind`` is ``"sum"``, ``"mean"`` or ``"max"``. ``"max"`` reduces a
    single axis and returns ``(values, argmax_indices)`` so that callers
    wiring a straight-through estimator have the selected indices at hand.
    """
    if op_kind == "sum":
        return Sum.apply(a, axes=axes, keepdims=keepdims)
    if op_kind == "mean":
        return Mean.apply(a, axes=axes, keepdims=keepdims)
    if op_kind == "max":
        a = as_tensor(a)
        if axes is None:
            a, axes = reshape(a, -1), 0
        elif not isinstance(axes, int):
            if len(axes) != 1:
                raise ValueError("max reduces exactly one axis")
            axes = axes[0]
        _norm_axes(axes, a.ndim)
        fn = MaxReduce(a)
        out = fn.forward(a.data, axis=axes, keepdims=keepdims)
        from .tensor import grad_enabled
        track = grad_enabled() and a.requires_grad
        return Tensor(out, requires_grad=track, _ctx=fn if track else None), fn.argmax
    raise ValueError(f"unknown reduction {op_kind!r}")


def sum(a, axes: Axes = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    return Sum.apply(a, axes=axes, keepdims=keepdims)


def mean(a, axes: Axes = None, keepdims: bool = False) -> Tensor:
    return Mean.apply(a, axes=axes, keepdims=keepdims)


# -- softmax family --------------------------------------------------------

class Softmax(Function):
    def forward(self, z, axis=-1):
        if z.shape[axis] < 1:
            raise ShapeError("softmax over an empty axis")
        self.axis = axis
        e = np.exp(z - z.max(axis=axis, keepdims=True))
        self.out = e / e.sum(axis=axis, keepdims=True)
        return self.out

    def backward(self, g):
        p = self.out
        return (p * (g - (g * p).sum(axis=self.axis, keepdims=True)),)


class LogSoftmax(Function):
    def forward(self, z, axis=-1):
        self.axis = axis
        shifted = z - z.max(axis=axis, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        self.out = shifted - lse
        return self.out

    def backward(self, g):
        p = np.exp(self.out)
        return (g - p * g.sum(axis=self.axis, keepdims=True),)


def softmax(z, axis: int = -1) -> Tensor:
    """Numerically stable softmax (max-subtracted)."""
    return Softmax.apply(z, axis=axis)


softmax_logits = softmax


def log_softmax(z, axis: int = -1) -> Tensor:
    return LogSoftmax.apply(z, axis=axis)


def _targets(target, batch_shape, n):
    t = np.asarray(target, dtype=np.int64)
    if t.shape != batch_shape:
        raise ShapeError(f"target shape {t.shape} does not match batch shape {batch_shape}")
    if (t < 0).any() or (t >= n).any():
        raise IndexError(f"target index out of range for {n} classes")
    return t


def cross_entropy(probs, target) -> Tensor:
    """``-log probs[target]``; batched inputs ``[B, n]`` give the batch mean."""
    probs = as_tensor(probs)
    n = probs.shape[-1]
    t = _targets(target, probs.shape[:-1], n)
    if probs.ndim == 1:
        return neg(log(getitem(probs, int(t))))
    picked = getitem(probs, (np.arange(probs.shape[0]), t))
    return neg(mean(log(picked)))


def cross_entropy_logits(logits, target) -> Tensor:
    """Cross-entropy straight from logits via log-softmax (batch mean)."""
    logits = as_tensor(logits)
    n = logits.shape[-1]
    t = _targets(target, logits.shape[:-1], n)
    ls = log_softmax(logits, axis=-1)
    if logits.ndim == 1:
        return neg(getitem(ls, int(t)))
    return neg(mean(getitem(ls, (np.arange(logits.shape[0]), t))))


# -- convolution -----------------------------------------------------------

class Conv2d(Function):
    def forward(self, x, w, padding=0):
        if w.ndim != 4 or w.shape[2] != w.shape[3]:
            raise ShapeError(f"weight must be [C_out, C_in, k, k], got {w.shape}")
        k = w.shape[-1]
        if k % 2 == 0:
            raise ValueError(f"kernel size must be odd, got {k}")
        if padding < 0:
            raise ValueError("padding must be non-negative")
        if x.ndim != 4 or x.shape[1] != w.shape[1]:
            raise ShapeError(f"input {x.shape} incompatible with weight {w.shape}")
        h_out = x.shape[2] + 2 * padding - k + 1
        w_out = x.shape[3] + 2 * padding - k + 1
        if h_out < 1 or w_out < 1:
            raise ShapeError(f"output size {h_out}x{w_out} < 1")
        self.x, self.w, self.pad = x, w, int(padding)
        return _kernels.conv2d_forward(np.ascontiguousarray(x), np.ascontiguousarray(w), self.pad)

    def backward(self, g):
        g = np.ascontiguousarray(g)
        gx = _kernels.conv2d_grad_input(g, np.ascontiguousarray(self.w), self.pad) \
            if self.inputs[0].requires_grad else None
        gw = _kernels.conv2d_grad_weight(g, np.ascontiguousarray(self.x), self.pad, self.w.shape[-1]) \
            if self.inputs[1].requires_grad else None
        return gx, gw


def conv2d(x, weight, padding: int = 0, bias: Optional[Tensor] = None) -> Tensor:
    """2-D cross-correlation (no kernel flip) with zero padding.

    ``x`` is ``[C_in, H, W]`` or ``[B, C_in, H, W]``; ``weight`` is
    ``[C_out, C_in, k, k]`` with odd ``k``.
    """
    x = as_tensor(x)
    single = x.ndim == 3
    if single:
        x = reshape(x, (1,) + x.shape)
    out = Conv2d.apply(x, weight, padding=padding)
    if bias is not None:
        out = add(out, reshape(bias, (1, -1, 1, 1)))
    if single:
        out = reshape(out, out.shape[1:])
    return out


def avg_pool2(x) -> Tensor:
    """2x2 average pooling over the last two axes (even sizes)."""
    x = as_tensor(x)
    *lead, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"avg_pool2 needs even spatial size, got {h}x{w}")
    y = reshape(x, tuple(lead) + (h // 2, 2, w // 2, 2))
    return mean(y, axes=(len(lead) + 1, len(lead) + 3))


# -- operator overloads ----------------------------------------------------

def _radd(self, other): return add(other, self)
def _rsub(self, other): return sub(other, self)
def _rmul(self, other): return mul(other, self)
def _rdiv(self, other): return div(other, self)


Tensor.__add__ = add
Tensor.__radd__ = _radd
Tensor.__sub__ = sub
Tensor.__rsub__ = _rsub
Tensor.__mul__ = mul
Tensor.__rmul__ = _rmul
Tensor.__truediv__ = div
Tensor.__rtruediv__ = _rdiv
Tensor.__neg__ = neg
Tensor.__matmul__ = matmul
Tensor.__rmatmul__ = lambda self, other: matmul(other, self)
Tensor.__pow__ = power
Tensor.__getitem__ = getitem
Tensor.reshape = reshape
Tensor.transpose = transpose
Tensor.T = property(lambda self: transpose(self))
Tensor.sum = sum
Tensor.mean = mean
Tensor.exp = exp
Tensor.log = log
Tensor.relu = relu
Tensor.sqrt = sqrt
Tensor.tanh = tanh
