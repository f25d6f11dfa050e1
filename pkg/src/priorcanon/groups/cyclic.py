"""The cyclic group C_n and its rotation action on square images."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..autodiff.tensor import Function, Tensor, as_tensor
from ..errors import ShapeError


@dataclass(frozen=True)
class CyclicElement:
    """Rotation by ``2*pi*k/n``; composition adds indices mod ``n``."""

    k: int
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("group order must be positive")
        object.__setattr__(self, "k", int(self.k) % int(self.n))

    @classmethod
    def identity(cls, n: int) -> "CyclicElement":
        return cls(0, n)

    def __mul__(self, other: "CyclicElement") -> "CyclicElement":
        if self.n != other.n:
            raise ValueError(f"cannot compose C{self.n} with C{other.n}")
        return CyclicElement(self.k + other.k, self.n)

    def inverse(self) -> "CyclicElement":
        return CyclicElement(-self.k, self.n)

    @property
    def is_identity(self) -> bool:
        return self.k == 0

    @property
    def angle(self) -> float:
        return 2.0 * math.pi * self.k / self.n

    @property
    def quarter_turns(self):
        """Number of 90-degree turns if the angle is a multiple of 90 degrees, else None."""
        if (4 * self.k) % self.n:
            return None
        return (4 * self.k) // self.n


def _snap(v: np.ndarray) -> np.ndarray:
    r = np.round(v)
    return np.where(np.abs(v - r) < 1e-9, r, v)


@functools.lru_cache(maxsize=256)
def bilinear_operator(size: int, angle: float):
    """4-tap resampling operator for a counter-clockwise rotation of a
    ``size x size`` grid about its center ``((size-1)/2, (size-1)/2)``.

    Returns ``(idx, wts)`` of shape ``[size*size, 4]``; taps falling outside
    the grid get weight 0 (zero fill).
    """
    c = (size - 1) / 2.0
    ii, jj = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    y, x = ii - c, jj - c
    cs, sn = math.cos(angle), math.sin(angle)
    sy = _snap(cs * y + sn * x + c).ravel()
    sx = _snap(-sn * y + cs * x + c).ravel()
    y0, x0 = np.floor(sy).astype(np.int64), np.floor(sx).astype(np.int64)
    fy, fx = sy - y0, sx - x0
    idx = np.zeros((size * size, 4), dtype=np.int64)
    wts = np.zeros((size * size, 4))
    taps = [(0, 0, (1 - fy) * (1 - fx)), (0, 1, (1 - fy) * fx), (1, 0, fy * (1 - fx)), (1, 1, fy * fx)]
    for t, (dy, dx, w) in enumerate(taps):
        ry, rx = y0 + dy, x0 + dx
        ok = (ry >= 0) & (ry < size) & (rx >= 0) & (rx < size) & (w != 0)
        idx[:, t] = np.where(ok, ry * size + rx, 0)
        wts[:, t] = np.where(ok, w, 0.0)
    idx.setflags(write=False)
    wts.setflags(write=False)
    return idx, wts


def _check_square(shape):
    if len(shape) < 2 or shape[-1] != shape[-2]:
        raise ShapeError(f"image must be square in its last two axes, got {shape}")


def rotate_array(arr: np.ndarray, angle: float = None, *, k: int = None, n: int = None) -> np.ndarray:
    """Rotate the last two axes of ``arr`` counter-clockwise about the center.

    Pass either ``angle`` (radians) or a group element as ``k`` and ``n``.
    Multiples of 90 degrees are exact index permutations; other angles use
    bilinear interpolation with zero fill.
    """
    arr = np.asarray(arr, dtype=np.float64)
    _check_square(arr.shape)
    quarter = None
    if angle is None:
        g = CyclicElement(k, n)
        angle, quarter = g.angle, g.quarter_turns
    else:
        turns = angle / (math.pi / 2)
        if abs(turns - round(turns)) < 1e-12:
            quarter = int(round(turns)) % 4
    if quarter is not None:
        return np.ascontiguousarray(np.rot90(arr, quarter, axes=(-2, -1)))
    size = arr.shape[-1]
    idx, wts = bilinear_operator(size, float(angle))
    flat = np.ascontiguousarray(arr.reshape(-1, size * size))
    return _kernels.bilinear_gather(flat, idx, wts).reshape(arr.shape)


def rotate_array_adjoint(arr: np.ndarray, *, k: int, n: int) -> np.ndarray:
    """Transpose of the linear map ``rotate_array(., k=k, n=n)``.

    For quarter turns this is the inverse rotation; for other angles it is
    the bilinear scatter used by the backward pass.
    """
    arr = np.asarray(arr, dtype=np.float64)
    _check_square(arr.shape)
    g = CyclicElement(k, n)
    if g.quarter_turns is not None:
        return np.ascontiguousarray(np.rot90(arr, -g.quarter_turns, axes=(-2, -1)))
    size = arr.shape[-1]
    idx, wts = bilinear_operator(size, g.angle)
    flat = np.ascontiguousarray(arr.reshape(-1, size * size))
    return _kernels.bilinear_scatter(flat, idx, wts, size * size).reshape(arr.shape)


class _Rotate(Function):
    def forward(self, x, angle=0.0, quarter=None):
        self.quarter, self.angle, self.shape = quarter, angle, x.shape
        if quarter is not None:
            return np.ascontiguousarray(np.rot90(x, quarter, axes=(-2, -1)))
        size = x.shape[-1]
        idx, wts = bilinear_operator(size, angle)
        return _kernels.bilinear_gather(np.ascontiguousarray(x.reshape(-1, size * size)), idx, wts).reshape(x.shape)

    def backward(self, g):
        if self.quarter is not None:
            return (np.ascontiguousarray(np.rot90(g, -self.quarter, axes=(-2, -1))),)
        size = self.shape[-1]
        idx, wts = bilinear_operator(size, self.angle)
        flat = np.ascontiguousarray(g.reshape(-1, size * size))
        return (_kernels.bilinear_scatter(flat, idx, wts, size * size).reshape(self.shape),)


def rotate_image(image, element: CyclicElement) -> Tensor:
    """Differentiable action of ``element`` on an image tensor ``[..., H, W]`` (H == W)."""
    image = as_tensor(image)
    _check_square(image.shape)
    return _Rotate.apply(image, angle=element.angle, quarter=element.quarter_turns)


def rotate_image_angle(image, angle: float) -> Tensor:
    image = as_tensor(image)
    _check_square(image.shape)
    turns = angle / (math.pi / 2)
    quarter = int(round(turns)) % 4 if abs(turns - round(turns)) < 1e-12 else None
    return _Rotate.apply(image, angle=float(angle), quarter=quarter)


def disk_mask(size: int, margin: float = 0.0) -> np.ndarray:
    """Boolean mask of pixels within ``(size-1)/2 - margin`` of the center.

    The mask is invariant under every rotation that maps the pixel grid to
    itself and is used to keep spatial pooling rotation-symmetric.
    """
    c = (size - 1) / 2.0
    ii, jj = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    return (ii - c) ** 2 + (jj - c) ** 2 <= (c - margin) ** 2 + 1e-9
