"""Canonicalization functions, prior losses and the canonicalized forward pass.

A canonicalizer maps an input ``x`` to a group element ``c(x)``; the predictor
then sees ``c(x)^-1 . x``. Discrete canonicalizers (cyclic groups on images)
pick the argmax of per-element logits and pass gradients to those logits with
a straight-through surrogate. Continuous canonicalizers (point clouds) build a
rotation by Gram-Schmidt on equivariant vectors.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .autodiff import ops
from .autodiff.tensor import Function, Tensor, as_tensor
from .errors import ShapeError
from .groups.cyclic import CyclicElement, rotate_array, rotate_array_adjoint, rotate_image
from .groups.rotations import gram_schmidt_rotation

DEFAULT_BETA = 100.0


# -- discrete -------------------------------------------------------------

def _argmax_lowest(logits: np.ndarray):
    """Row-wise argmax with ties resolved to the lowest index, plus a tie flag."""
    sel = np.argmax(logits, axis=-1)
    top = np.take_along_axis(logits, sel[:, None], axis=-1)
    ties = (logits == top).sum(-1) > 1
    return sel.astype(np.int64), ties


class _SelectInverseRotation(Function):
    """``out[b] = rho(sel[b])^-1 x[b]`` with a straight-through path to ``probs``.

    The forward is the hard selection. The backward treats the selector as
    ``one_hot + probs - stop_grad(probs)``, so ``d out / d probs[b, g]`` is
    ``rho(g)^-1 x[b]``; the input receives the transpose of the applied
    rotation.
    """

    def forward(self, probs, x, selected=None, n=1):
        self.x, self.sel, self.n = x, selected, n
        out = np.empty_like(x)
        for b, k in enumerate(selected):
            out[b] = rotate_array(x[b], k=-int(k), n=n)
        return out

    def backward(self, g):
        x, n = self.x, self.n
        gprobs = np.empty((x.shape[0], n))
        for h in range(n):
            rotated = rotate_array(x, k=-h, n=n)
            gprobs[:, h] = (g * rotated).reshape(x.shape[0], -1).sum(-1)
        gx = np.empty_like(x)
        for b, k in enumerate(self.sel):
            gx[b] = rotate_array_adjoint(g[b], k=-int(k), n=n)
        return gprobs, gx


@dataclass
class DiscreteCanonOutput:
    """Per-batch result of a cyclic canonicalizer.

    ``selected[b]`` is the argmax element index and ``canonical_input[b]``
    equals ``rho(selected[b])^-1 x[b]``. ``ties[b]`` flags samples whose top
    logit was shared (the lowest index was chosen).
    """

    logits: Tensor
    probs: Tensor
    selected: np.ndarray
    canonical_input: Tensor
    ties: np.ndarray
    n: int

    @property
    def elements(self) -> List[CyclicElement]:
        return [CyclicElement(int(k), self.n) for k in self.selected]


def canonicalize_discrete(x, net) -> DiscreteCanonOutput:
    """Canonicalize images ``[B, C, H, W]`` (or one ``[C, H, W]``) with a C_n net.

    ``net(x)`` must return logits ``[B, n]`` whose cyclic shift follows the
    input rotation.
    """
    x = as_tensor(x)
    single = x.ndim == 3
    if single:
        x = ops.reshape(x, (1,) + x.shape)
    if x.ndim != 4:
        raise ShapeError(f"expected [B, C, H, W] images, got {x.shape}")
    logits = as_tensor(net(x))
    if logits.ndim != 2 or logits.shape[0] != x.shape[0]:
        raise ShapeError(f"canonicalizer returned logits of shape {logits.shape}")
    n = logits.shape[1]
    probs = ops.softmax(logits, axis=-1)
    selected, ties = _argmax_lowest(logits.data)
    canonical = _SelectInverseRotation.apply(probs, x, selected=selected, n=n)
    if single:
        canonical = ops.reshape(canonical, canonical.shape[1:])
    return DiscreteCanonOutput(logits, probs, selected, canonical, ties, n)


def one_hot_mixture(out: DiscreteCanonOutput, x) -> np.ndarray:
    """Reference forward ``sum_g one_hot[g] * rho(g)^-1 x`` (no gradients)."""
    x = np.asarray(as_tensor(x).data)
    single = x.ndim == 3
    if single:
        x = x[None]
    onehot = np.eye(out.n)[out.selected]
    mix = np.zeros_like(x)
    for h in range(out.n):
        mix = mix + onehot[:, h].reshape(-1, 1, 1, 1) * rotate_array(x, k=-h, n=out.n)
    return mix[0] if single else mix


def prior_loss_discrete(out: DiscreteCanonOutput) -> Tensor:
    """Batch mean of ``-log p(identity)``; computed from the logits via log-softmax."""
    ls = ops.log_softmax(out.logits, axis=-1)
    return ops.neg(ops.mean(ls[:, 0]))


# -- continuous -----------------------------------------------------------

@dataclass
class ContinuousCanonOutput:
    """``rotation[b]`` is ``R_c(x)``; ``canonical_input[b] = points[b] @ rotation[b]``."""

    rotation: Tensor
    canonical_input: Tensor
    vectors: Optional[Tensor] = field(default=None, repr=False)


def canonicalize_continuous(points, net) -> ContinuousCanonOutput:
    """Canonicalize centered clouds ``[B, N, dim]`` (or one ``[N, dim]``).

    ``net(points)`` returns vectors ``[B, dim, dim]`` (one per row) that
    rotate with the cloud. Their Gram-Schmidt frame ``M`` satisfies
    ``M(P Q^T) = M(P) Q^T`` so ``R = M^T`` rotates with the cloud and
    ``P @ R`` is invariant.
    """
    P = as_tensor(points)
    single = P.ndim == 2
    if single:
        P = ops.reshape(P, (1,) + P.shape)
    if P.ndim != 3:
        raise ShapeError(f"expected [B, N, dim] points, got {P.shape}")
    V = as_tensor(net(P))
    if V.ndim == 2:
        V = ops.reshape(V, (1,) + V.shape)
    M = gram_schmidt_rotation(V)
    R = ops.transpose(M, (0, 2, 1))
    canonical = ops.matmul(P, R)
    if single:
        return ContinuousCanonOutput(ops.reshape(R, R.shape[1:]), ops.reshape(canonical, canonical.shape[1:]),
                                     ops.reshape(V, V.shape[1:]))
    return ContinuousCanonOutput(R, canonical, V)


def prior_loss_continuous(out: ContinuousCanonOutput, lam: float = 1.0) -> Tensor:
    """Batch mean of ``lam * (dim - tr R)``, which equals ``lam/2 * ||R - I||_F^2``."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    R = out.rotation
    if R.ndim == 2:
        R = ops.reshape(R, (1,) + R.shape)
    dim = R.shape[-1]
    eye = np.eye(dim)
    trace = ops.sum(R * eye, axes=(1, 2))
    return ops.mean((dim - trace) * lam)


def prior_loss(out, lam: float = 1.0) -> Tensor:
    if isinstance(out, DiscreteCanonOutput):
        return prior_loss_discrete(out)
    return prior_loss_continuous(out, lam)


# -- composition ----------------------------------------------------------

def canonicalize(x, canon):
    """Dispatch on the canonicalizer type: cyclic nets expose ``n``."""
    if hasattr(canon, "n"):
        return canonicalize_discrete(x, canon)
    return canonicalize_continuous(x, canon)


def _restore_images(y: Tensor, out: DiscreteCanonOutput) -> Tensor:
    if y.ndim != 4 or y.shape[-1] != y.shape[-2]:
        raise ShapeError(f"group output action on images needs [B, C, H, H] outputs, got {y.shape}")
    parts = [rotate_image(y[b], CyclicElement(int(k), out.n)) for b, k in enumerate(out.selected)]
    return ops.stack(parts, axis=0)


def _restore_vectors(y: Tensor, out: ContinuousCanonOutput) -> Tensor:
    R = out.rotation
    single = R.ndim == 2
    if single:
        R = ops.reshape(R, (1,) + R.shape)
        y = ops.reshape(y, (1,) + y.shape)
    if y.ndim != 3 or y.shape[-1] != R.shape[-1]:
        raise ShapeError(f"group output action on points needs [B, N, {R.shape[-1]}] outputs, got {y.shape}")
    restored = ops.matmul(y, ops.transpose(R, (0, 2, 1)))
    return ops.reshape(restored, restored.shape[1:]) if single else restored


def canonicalized_forward(x, canon, predictor, output_action: str = "trivial", return_canon: bool = False):
    """``f(x) = rho'(c(x)) p(rho(c(x))^-1 x)``.

    ``output_action`` is ``"trivial"`` for invariant outputs (class logits,
    per-point labels) or ``"group"`` for outputs that rotate with the input:
    image-shaped maps for cyclic canonicalizers, per-point vectors for
    rotation canonicalizers.
    """
    if output_action not in ("trivial", "group"):
        raise ValueError(f"unknown output action {output_action!r}")
    out = canonicalize(x, canon)
    y = as_tensor(predictor(out.canonical_input))
    if output_action == "group":
        if isinstance(out, DiscreteCanonOutput):
            single = y.ndim == 3
            y4 = ops.reshape(y, (1,) + y.shape) if single else y
            y4 = _restore_images(y4, out)
            y = ops.reshape(y4, y4.shape[1:]) if single else y4
        else:
            y = _restore_vectors(y, out)
    return (y, out) if return_canon else y


def total_loss(task_loss, prior, beta: float = DEFAULT_BETA) -> Tensor:
    """``task + beta * prior``; pass ``task_loss=None`` for prior-only training."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    if task_loss is None:
        return as_tensor(prior) * beta
    if prior is None or beta == 0:
        return as_tensor(task_loss)
    return as_tensor(task_loss) + as_tensor(prior) * beta
