"""First-order optimizers operating in place on leaf tensors."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor


def _grads_for(params, grads):
    if grads is None:
        grads = [p.grad for p in params]
    if len(grads) != len(params):
        raise ShapeError(f"{len(params)} params but {len(grads)} grads")
    out = []
    for p, g in zip(params, grads):
        g = np.zeros_like(p.data) if g is None else np.asarray(g, dtype=np.float64)
        if g.shape != p.shape:
            raise ShapeError(f"grad shape {g.shape} != param shape {p.shape}")
        out.append(g)
    return out


def sgd_step(params: Sequence[Tensor], grads=None, lr: float = 1e-2) -> None:
    """``p <- p - lr * g`` for every parameter (uses ``p.grad`` when ``grads`` is None)."""
    if lr <= 0:
        raise ValueError("lr must be positive")
    for p, g in zip(params, _grads_for(params, grads)):
        p.data -= lr * g


@dataclass
class AdamState:
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)
    t: int = 0


def adam_step(params: Sequence[Tensor], state: AdamState, grads=None, lr: float = 1e-3,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One bias-corrected Adam update; ``state`` is advanced in place."""
    if lr <= 0:
        raise ValueError("lr must be positive")
    grads = _grads_for(params, grads)
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


class SGD:
    def __init__(self, params, lr=1e-2):
        self.params, self.lr = list(params), lr

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        sgd_step(self.params, None, self.lr)


class Adam:
    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params, self.lr, self.betas, self.eps = list(params), lr, betas, eps
        self.state = AdamState()

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        adam_step(self.params, self.state, None, self.lr, self.betas[0], self.betas[1], self.eps)


def make_optimizer(kind: str, params, lr: float):
    if kind == "sgd":
        return SGD(params, lr)
    if kind == "adam":
        return Adam(params, lr)
    raise ValueError(f"unknown optimizer {kind!r}")
