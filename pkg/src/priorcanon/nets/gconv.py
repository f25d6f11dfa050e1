"""Group convolutions for C_n with regular-representation features.

Feature maps carry an explicit fiber axis: ``[B, C, n, H, W]`` (or
``[C, n, H, W]`` for a single sample). Rotating the input by ``g`` rotates
every map spatially and shifts the fiber axis cyclically by ``g``:
``F(rho(g) x)[:, h] = rho(g) F(x)[:, h - g]``.

Kernels are never learned per fiber slot. Each layer stores base kernels and
expands them into rotated (and, for group layers, fiber-shifted) copies on
every forward pass, so weight sharing holds by construction.
"""
from __future__ import annotations

import functools
import math

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Tensor, as_tensor
from ..errors import ShapeError
from ..groups.cyclic import CyclicElement, disk_mask
from .module import Module, he_normal


KERNEL_SMOOTHING = 1.0


@functools.lru_cache(maxsize=64)
def kernel_rotation_operators(k: int, n: int) -> np.ndarray:
    """Stack ``T[h]`` of ``k*k x k*k`` matrices: slot ``h`` of a layer uses the
    kernel ``T[h] @ vec(base)``.

    When every element of C_n is a quarter turn (n in 1, 2, 4) the base kernel
    is used as-is and ``T[h]`` are exact index permutations. Otherwise the base
    kernel holds coefficients of Gaussian bumps (width ``KERNEL_SMOOTHING``)
    centred on the grid, cut to a disk of radius ``(k-1)/2 + 0.5``, and every
    slot samples that continuous kernel rotated by ``2*pi*h/n``. The basis is
    scaled so a random base kernel keeps its expected norm. Resampling a
    pixel kernel bilinearly instead blurs the odd slots only and breaks C8
    equivariance by tens of percent per layer.
    """
    c = (k - 1) / 2.0
    ii, jj = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
    basis = np.eye(k * k).reshape(k * k, k, k)
    T = np.zeros((n, k * k, k * k))
    if (4 % n) != 0:
        u = np.stack([ii.ravel() - c, jj.ravel() - c], axis=-1)
        inside = np.linalg.norm(u, axis=-1) <= c + 0.5 + 1e-9
    for h in range(n):
        g = CyclicElement(h, n)
        if g.quarter_turns is not None and (4 % n) == 0:
            rotated = np.rot90(basis, g.quarter_turns, axes=(-2, -1)).reshape(k * k, k * k)
            T[h] = rotated.T
        elif g.quarter_turns is not None and h > 0:
            T[h] = np.rot90(T[0].reshape(k, k, k * k), g.quarter_turns, axes=(0, 1)).reshape(k * k, k * k)
        else:
            cs, sn = math.cos(g.angle), math.sin(g.angle)
            src = np.stack([cs * u[:, 0] + sn * u[:, 1], -sn * u[:, 0] + cs * u[:, 1]], axis=-1)
            d2 = ((src[:, None, :] - u[None, :, :]) ** 2).sum(-1)
            T[h] = np.exp(-d2 / (2 * KERNEL_SMOOTHING ** 2)) * inside[:, None]
            if h == 0:
                # keep the expected kernel norm of a random base kernel unchanged
                scale = math.sqrt(k * k) / np.linalg.norm(T[0])
            T[h] *= scale
    T.setflags(write=False)
    return T


def _rotate_kernels(w: Tensor, n: int) -> Tensor:
    """``w[..., k, k]`` -> ``[n, ..., k, k]`` with slot ``h`` rotated by ``h``."""
    k = w.shape[-1]
    lead = w.shape[:-2]
    flat = ops.reshape(w, (1, -1, k * k))
    T_t = np.ascontiguousarray(np.swapaxes(kernel_rotation_operators(k, n), -1, -2))
    rot = ops.matmul(flat, Tensor(T_t))  # [n, M, k*k]
    return ops.reshape(rot, (n,) + lead + (k, k))


class GConvLayer(Module):
    """Lifting (``kind="lifting"``) or group (``kind="group"``) convolution.

    Base kernels have shape ``[C_out, C_in, 1, k, k]`` for lifting and
    ``[C_out, C_in, n, k, k]`` for group layers; there is one bias per output
    channel, shared across the fiber.
    """

    def __init__(self, rng, kind: str, c_in: int, c_out: int, n: int, k: int = 3, bias: bool = True):
        super().__init__()
        if kind not in ("lifting", "group"):
            raise ValueError(f"unknown layer kind {kind!r}")
        if k % 2 == 0:
            raise ValueError("kernel size must be odd")
        self.kind, self.c_in, self.c_out, self.n, self.k = kind, c_in, c_out, n, k
        fibers = 1 if kind == "lifting" else n
        fan_in = c_in * fibers * k * k
        self.weight = self.add_param("weight", he_normal(rng, (c_out, c_in, fibers, k, k), fan_in))
        self.bias = self.add_param("bias", np.zeros(c_out)) if bias else None

    def expanded_weight(self) -> Tensor:
        """Dense conv weight ``[C_out*n, C_in*fibers, k, k]`` built from the base kernels."""
        n, k = self.n, self.k
        co, ci = self.c_out, self.c_in
        if self.kind == "lifting":
            rot = _rotate_kernels(ops.reshape(self.weight, (co, ci, k, k)), n)  # [n, co, ci, k, k]
            full = ops.transpose(rot, (1, 0, 2, 3, 4))  # [co, n, ci, k, k]
            return ops.reshape(full, (co * n, ci, k, k))
        rot = _rotate_kernels(self.weight, n)  # [n(h), co, ci, n(g'), k, k]
        H = np.arange(n).reshape(1, n, 1, 1)
        O = np.arange(co).reshape(co, 1, 1, 1)
        I = np.arange(ci).reshape(1, 1, ci, 1)
        G = np.arange(n).reshape(1, 1, 1, n)
        full = ops.getitem(rot, (H, O, I, (G - H) % n))  # [co, n(h), ci, n(g), k, k]
        return ops.reshape(full, (co * n, ci * n, k, k))

    def forward(self, x) -> Tensor:
        x = as_tensor(x)
        if self.kind == "lifting":
            single = x.ndim == 3
            if single:
                x = ops.reshape(x, (1,) + x.shape)
            if x.ndim != 4 or x.shape[1] != self.c_in:
                raise ShapeError(f"lifting layer expects [B, {self.c_in}, H, W], got {x.shape}")
            if x.shape[-1] != x.shape[-2]:
                raise ShapeError("group convolutions need square inputs")
            inp = x
        else:
            single = x.ndim == 4
            if single:
                x = ops.reshape(x, (1,) + x.shape)
            if x.ndim != 5 or x.shape[1] != self.c_in:
                raise ShapeError(f"group layer expects [B, {self.c_in}, n, H, W], got {x.shape}")
            if x.shape[2] != self.n:
                raise ShapeError(f"fiber length {x.shape[2]} != group order {self.n}")
            B, C, n, Hh, Ww = x.shape
            inp = ops.reshape(x, (B, C * n, Hh, Ww))
        out = ops.conv2d(inp, self.expanded_weight(), padding=self.k // 2)
        B, _, Hh, Ww = out.shape
        out = ops.reshape(out, (B, self.c_out, self.n, Hh, Ww))
        if self.bias is not None:
            out = out + ops.reshape(self.bias, (1, self.c_out, 1, 1, 1))
        return ops.reshape(out, out.shape[1:]) if single else out


def lifting_conv(image, layer: GConvLayer) -> Tensor:
    if layer.kind != "lifting":
        raise ValueError("lifting_conv needs a lifting layer")
    return layer(image)


def group_conv(features, layer: GConvLayer) -> Tensor:
    if layer.kind != "group":
        raise ValueError("group_conv needs a group layer")
    return layer(features)


def shift_fibers(features: np.ndarray, g: int) -> np.ndarray:
    """``out[:, h] = features[:, h - g]`` along the fiber axis (axis -3)."""
    return np.roll(features, g, axis=-3)


def fiber_logits(features, mask: np.ndarray = None) -> Tensor:
    """Average channels and space, leaving one logit per fiber slot.

    ``features`` is ``[B, C, n, H, W]`` (or unbatched); returns ``[B, n]``.
    With ``mask`` the spatial average runs over masked pixels only.
    """
    f = as_tensor(features)
    single = f.ndim == 4
    if single:
        f = ops.reshape(f, (1,) + f.shape)
    if mask is None:
        out = ops.mean(f, axes=(1, 3, 4))
    else:
        m = np.asarray(mask, dtype=np.float64)
        denom = f.shape[1] * m.sum()
        out = ops.sum(f * m, axes=(1, 3, 4)) / denom
    return ops.reshape(out, (out.shape[1],)) if single else out


class EquivariantBatchNorm(Module):
    """Batch norm with one statistic per channel pooled over batch, fiber and
    space, which keeps it commuting with fiber shifts and spatial rotations."""

    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.1, affine: bool = True):
        super().__init__()
        self.eps, self.momentum = eps, momentum
        self.running_mean = self.add_buffer("running_mean", np.zeros(channels))
        self.running_var = self.add_buffer("running_var", np.ones(channels))
        self.gamma = self.add_param("gamma", np.ones(channels)) if affine else None
        self.beta = self.add_param("beta", np.zeros(channels)) if affine else None

    def forward(self, x) -> Tensor:
        x = as_tensor(x)
        if x.ndim != 5:
            raise ShapeError(f"expected [B, C, n, H, W], got {x.shape}")
        shape = (1, x.shape[1], 1, 1, 1)
        if self.training:
            mu = ops.mean(x, axes=(0, 2, 3, 4), keepdims=True)
            centered = x - mu
            var = ops.mean(centered * centered, axes=(0, 2, 3, 4), keepdims=True)
            count = x.size // x.shape[1]
            self.running_mean *= 1 - self.momentum
            self.running_mean += self.momentum * mu.data.reshape(-1)
            unbiased = var.data.reshape(-1) * count / max(count - 1, 1)
            self.running_var *= 1 - self.momentum
            self.running_var += self.momentum * unbiased
            y = centered / ops.sqrt(var + self.eps)
        else:
            mu = self.running_mean.reshape(shape)
            y = (x - mu) / np.sqrt(self.running_var.reshape(shape) + self.eps)
        if self.gamma is not None:
            y = y * ops.reshape(self.gamma, shape) + ops.reshape(self.beta, shape)
        return y


def equivariant_norm(features, norm: EquivariantBatchNorm) -> Tensor:
    return norm(features)


class GroupCanonicalizer(Module):
    """C_n-equivariant network mapping an image to one logit per group element.

    Lifting conv, then ``depth - 1`` group convs (each followed by
    equivariant batch norm and ReLU), then a single-channel group conv and a
    disk-masked spatial mean along the fiber.
    """

    def __init__(self, rng, n: int, in_channels: int = 1, hidden: int = 8, depth: int = 2,
                 k: int = 5, use_norm: bool = True):
        super().__init__()
        self.n = n
        self.layers = []
        c = in_channels
        for i in range(depth):
            kind = "lifting" if i == 0 else "group"
            conv = self.add_child(f"conv{i}", GConvLayer(rng, kind, c, hidden, n, k))
            norm = self.add_child(f"norm{i}", EquivariantBatchNorm(hidden)) if use_norm else None
            self.layers.append((conv, norm))
            c = hidden
        self.head = self.add_child("head", GConvLayer(rng, "group", c, 1, n, k))
        self._masks = {}

    def features(self, x) -> Tensor:
        h = as_tensor(x)
        for conv, norm in self.layers:
            h = conv(h)
            if norm is not None:
                h = norm(h)
            h = ops.relu(h)
        return self.head(h)

    def forward(self, x) -> Tensor:
        x = as_tensor(x)
        single = x.ndim == 3
        if single:
            x = ops.reshape(x, (1,) + x.shape)
        size = x.shape[-1]
        if size not in self._masks:
            self._masks[size] = disk_mask(size)
        logits = fiber_logits(self.features(x), self._masks[size])
        return ops.reshape(logits, (self.n,)) if single else logits


class FixedCanonicalizer(Module):
    """Frozen canonicalizer emitting the same logits for every input.

    With the default ``k=0`` every input is mapped to the identity element.
    """

    def __init__(self, n: int, k: int = 0, margin: float = 10.0):
        super().__init__()
        self.n = n
        self.logits = np.zeros(n)
        self.logits[k % n] = margin

    def forward(self, x) -> Tensor:
        x = as_tensor(x)
        if x.ndim == 3:
            return Tensor(self.logits.copy())
        return Tensor(np.tile(self.logits, (x.shape[0], 1)))
