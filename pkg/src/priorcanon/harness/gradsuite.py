"""Finite-difference checks over every differentiable building block.

Each case builds a small scalar function of some parameters and compares
reverse-mode gradients with central differences. The straight-through case
checks the surrogate ``sum_g (one_hot + p - stop_grad(p))[g] * task[g]``,
whose true gradient is what the estimator is meant to deliver.
"""
from __future__ import annotations

from typing import Dict, List

import numpy as np

from ..autodiff import ops
from ..autodiff.gradcheck import gradcheck
from ..autodiff.tensor import Tensor
from ..canon import (
    canonicalize_continuous, canonicalize_discrete, prior_loss_continuous, prior_loss_discrete,
)
from ..groups.cyclic import CyclicElement, rotate_image
from ..groups.rotations import gram_schmidt_rotation
from ..nets.gconv import EquivariantBatchNorm, GConvLayer, GroupCanonicalizer, fiber_logits
from ..nets.module import Conv2d, Linear
from ..nets.pointhead import PointCanonicalizer
from .models import ImageClassifier, PointClassifier, PointSegmenter

DEFAULT_TOL = 1e-4


def _leaf(rng, shape, low=None):
    data = rng.standard_normal(shape) if low is None else rng.uniform(low, low + 1.0, shape)
    return Tensor(data, requires_grad=True)


def _jitter(module, rng, scale=0.1):
    """Move zero-initialized biases off zero so no ReLU sits exactly on its kink."""
    for name, p in module.named_parameters():
        if name.endswith("bias") or name.endswith("beta"):
            p.data += scale * rng.standard_normal(p.shape)
    return module


def _cloud(rng, n=24):
    P = rng.standard_normal((n, 3)) * np.array([1.5, 1.0, 0.6])
    P[:, 0] += 0.4 * P[:, 1] ** 2
    return P - P.mean(0)


def _elementwise_cases(rng):
    a, b = _leaf(rng, (3, 4)), _leaf(rng, (4,))
    pos = _leaf(rng, (3, 4), low=0.5)
    w = rng.standard_normal((3, 4))
    yield "add/sub/mul broadcast", lambda: ops.sum((a + b) * (a - b) * w), [a, b]
    yield "div", lambda: ops.sum(a / pos * w), [a, pos]
    yield "exp/log/sqrt", lambda: ops.sum(ops.log(pos) * w + ops.exp(a * 0.3) + ops.sqrt(pos)), [a, pos]
    yield "relu/tanh/neg", lambda: ops.sum(ops.relu(a) * w - ops.tanh(a)), [a]


def _tensor_cases(rng):
    A, B = _leaf(rng, (3, 4)), _leaf(rng, (4, 2))
    yield "matmul", lambda: ops.sum(ops.matmul(A, B) ** 2), [A, B]
    x, k = _leaf(rng, (2, 5, 5)), _leaf(rng, (3, 2, 3, 3))
    yield "conv2d", lambda: ops.sum(ops.conv2d(x, k, padding=1) ** 2), [x, k]
    m = _leaf(rng, (3, 5))
    yield "mean/sum", lambda: ops.mean(m * m) + ops.sum(ops.sum(m, axes=0) ** 2), [m]
    yield "max-reduce", lambda: ops.sum(ops.reduce("max", m, axes=1)[0] ** 2), [m]
    z = _leaf(rng, (4, 6))
    yield "softmax+cross-entropy", lambda: ops.cross_entropy(ops.softmax(z), np.array([0, 3, 5, 1])), [z]
    yield "log-softmax", lambda: ops.cross_entropy_logits(z, np.array([2, 2, 0, 5])), [z]
    img = _leaf(rng, (1, 9, 9))
    yield "bilinear rotation", lambda: ops.sum(rotate_image(img, CyclicElement(1, 8)) * np.arange(81.0).reshape(1, 9, 9)), [img]
    yield "reshape/transpose/stack/concat", lambda: ops.sum(
        ops.concat([ops.transpose(ops.reshape(m, (5, 3))), ops.stack([m[0], m[1], m[2]])], axis=1) ** 2), [m]


def _layer_cases(rng):
    lin = _jitter(Linear(rng, 4, 3), rng)
    x = _leaf(rng, (2, 4))
    yield "Linear", lambda: ops.sum(lin(x) ** 2), lin.parameters() + [x]
    conv = _jitter(Conv2d(rng, 2, 3, 3), rng)
    xi = _leaf(rng, (2, 2, 6, 6))
    yield "Conv2d layer", lambda: ops.sum(conv(xi) ** 2), conv.parameters() + [xi]
    for n in (4, 8):
        lift = _jitter(GConvLayer(rng, "lifting", 1, 2, n, 3), rng)
        g1 = _jitter(GConvLayer(rng, "group", 2, 2, n, 3), rng)
        g2 = GConvLayer(rng, "group", 2, 1, n, 3)
        im = _leaf(rng, (1, 1, 7, 7))
        w = rng.standard_normal((1, 1, n, 7, 7))
        yield f"lifting + two group convs C{n}", lambda lift=lift, g1=g1, g2=g2, im=im, w=w: ops.sum(
            g2(ops.relu(g1(ops.relu(lift(im))))) * w), lift.parameters() + g1.parameters() + g2.parameters() + [im]
    bn = EquivariantBatchNorm(2)
    f = _leaf(rng, (3, 2, 4, 3, 3))
    wf = rng.standard_normal((3, 2, 4, 3, 3))
    yield "equivariant batch norm", lambda: ops.sum(bn(f) * wf), bn.parameters() + [f]
    fl = _leaf(rng, (2, 3, 4, 5, 5))
    yield "fiber logits", lambda: ops.sum(fiber_logits(fl, np.ones((5, 5), bool)) * np.arange(8.0).reshape(2, 4)), [fl]
    canon = _jitter(GroupCanonicalizer(rng, 4, 1, 2, 2, 3), rng)
    cim = _leaf(rng, (2, 1, 7, 7))
    yield "group canonicalizer C4", lambda: ops.sum(canon(cim) * np.arange(8.0).reshape(2, 4)), canon.parameters() + [cim]
    clf = _jitter(ImageClassifier(rng, 3, 8, 1, 2), rng)
    cx = _leaf(rng, (2, 1, 8, 8))
    yield "image classifier", lambda: ops.cross_entropy_logits(clf(cx), np.array([0, 2])), clf.parameters() + [cx]
    pclf = _jitter(PointClassifier(rng, 3, 6), rng)
    px = Tensor(_cloud(rng)[None], requires_grad=True)
    yield "point classifier", lambda: ops.cross_entropy_logits(pclf(px), np.array([1])), pclf.parameters() + [px]
    seg = _jitter(PointSegmenter(rng, 3, 6), rng)
    yield "point segmenter", lambda: ops.sum(seg(px) ** 2), seg.parameters()


def _rotation_cases(rng):
    for dim in (2, 3):
        V = _leaf(rng, (dim, dim))
        target = rng.standard_normal((dim, dim))
        yield f"gram-schmidt dim {dim}", lambda V=V, target=target: ops.sum(gram_schmidt_rotation(V) * target), [V]
    head = _jitter(PointCanonicalizer(rng, 8), rng)
    P = _cloud(rng)
    yield "point vector head", lambda: ops.sum(head(P) * np.arange(9.0).reshape(3, 3)), head.parameters()
    # point coordinates are data: the invariant features carry no gradient
    # back to them, so only the head parameters are checked here
    yield "continuous prior loss", lambda: prior_loss_continuous(canonicalize_continuous(P, head), 1.5), \
        head.parameters()


def _prior_cases(rng):
    for n in (4, 8):
        canon = _jitter(GroupCanonicalizer(rng, n, 1, 2, 1, 3), rng)
        x = _leaf(rng, (2, 1, 7, 7))
        yield f"discrete prior loss C{n}", lambda canon=canon, x=x: prior_loss_discrete(canonicalize_discrete(x, canon)), \
            canon.parameters() + [x]


def _straight_through_cases(rng):
    """Autograd through the hard selection vs finite differences of the surrogate."""
    for n in (4, 8):
        canon = _jitter(GroupCanonicalizer(rng, n, 1, 2, 1, 3), rng)
        canon.eval()
        x = Tensor(rng.uniform(0, 1, (2, 1, 7, 7)), requires_grad=True)
        w = rng.standard_normal((2, 1, 7, 7))
        out0 = canonicalize_discrete(x, canon)
        p0 = out0.probs.data.copy()
        one_hot = np.eye(n)[out0.selected]

        def surrogate(canon=canon, x=x, w=w, p0=p0, one_hot=one_hot, n=n):
            p = ops.softmax(canon(x), axis=-1)
            sel = p + (one_hot - p0)
            total = None
            for h in range(n):
                rotated = rotate_image(x, CyclicElement(-h, n))
                term = ops.sum(sel[:, h] * ops.sum(rotated * w, axes=(1, 2, 3)))
                total = term if total is None else total + term
            return total

        def hard(canon=canon, x=x, w=w):
            return ops.sum(canonicalize_discrete(x, canon).canonical_input * w)

        params = canon.parameters() + [x]
        yield f"straight-through surrogate C{n}", surrogate, params, hard


def iter_cases(seed: int = 0):
    rng = np.random.default_rng(seed)
    for group in (_elementwise_cases, _tensor_cases, _layer_cases, _rotation_cases, _prior_cases,
                  _straight_through_cases):
        yield from group(rng)


def _grads(fn, params):
    for p in params:
        p.grad = None
    fn().backward()
    return [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]


def run_gradient_suite(seed: int = 0, tol: float = DEFAULT_TOL, eps: float = 1e-6) -> List[Dict]:
    """Run every case; returns ``[{name, rel_error, passed}]``.

    For the straight-through cases the reported error also covers the
    difference between the hard-selection gradients and the surrogate's
    gradients, which must agree exactly.
    """
    results = []
    for case in iter_cases(seed):
        name, fn, params = case[:3]
        err = gradcheck(fn, params, eps)
        if len(case) == 4:
            hard = case[3]
            a, b = _grads(hard, params), _grads(fn, params)
            scale = max(max(np.abs(g).max() for g in b), 1e-10)
            err = max(err, max(float(np.abs(u - v).max()) for u, v in zip(a, b)) / scale)
        results.append({"name": name, "rel_error": float(err), "passed": bool(err <= tol)})
    return results
