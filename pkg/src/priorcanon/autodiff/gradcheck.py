"""Central finite-difference gradient checks."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, no_grad


def numerical_grad(fn: Callable[[], Tensor], t: Tensor, eps: float = 1e-6) -> np.ndarray:
    """d fn() / d t by central differences, perturbing ``t.data`` in place."""
    grad = np.zeros_like(t.data)
    flat, gflat = t.data.reshape(-1), grad.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = fn().item()
            flat[i] = orig - eps
            lo = fn().item()
            flat[i] = orig
            gflat[i] = (hi - lo) / (2 * eps)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-10) -> float:
    """``max|a - n| / max(max|a|, max|n|, floor)``."""
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0), floor)
    return float(np.abs(analytic - numeric).max(initial=0.0) / scale)


def gradcheck(fn: Callable[[], Tensor], params: Sequence[Tensor], eps: float = 1e-6) -> float:
    """Relative error between reverse-mode and finite-difference gradients.

    All parameters are compared as one concatenated vector:
    ``max|a - n| / max(max|a|, max|n|)`` over every entry. A parameter whose
    true gradient is zero is thereby judged against the overall gradient
    scale rather than against its own finite-difference noise.

    ``fn`` must rebuild the graph on every call and return a scalar tensor.
    """
    for p in params:
        p.grad = None
    fn().backward()
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]
    numeric = [numerical_grad(fn, p, eps) for p in params]
    a = np.concatenate([g.ravel() for g in analytic]) if analytic else np.zeros(0)
    n = np.concatenate([g.ravel() for g in numeric]) if numeric else np.zeros(0)
    return relative_error(a, n)
