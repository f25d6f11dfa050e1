"""Isotropic matrix Fisher distributions on SO(2) and SO(3).

Densities are taken with respect to the Haar measure normalized to total
mass 1, so ``p(R | mode, s) = exp(s * tr(mode^T R)) / c(s)`` with
``c(0) = 1``.

Both normalizer integrals reduce to one dimension because the integrand only
depends on the rotation angle:

- SO(2): ``tr = 2 cos(theta)``, theta uniform on ``[0, 2 pi)``;
- SO(3): ``tr = 1 + 2 cos(w)``, angle density ``(1 - cos w) / pi`` on ``[0, pi]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate

from .rotations import check_rotation, proper_svd

_QUAD = dict(epsabs=0.0, epsrel=1e-13, limit=400)


def haar_angle_density(w, dim: int = 3):
    """Density of the rotation angle of a Haar-uniform rotation."""
    w = np.asarray(w, dtype=np.float64)
    if dim == 2:
        return np.full_like(w, 1.0 / math.pi)  # angle folded onto [0, pi]
    return (1.0 - np.cos(w)) / math.pi


def _trace_of_angle(w, dim):
    return 2.0 * math.cos(w) if dim == 2 else 1.0 + 2.0 * math.cos(w)


def _check(s, dim):
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")
    if not s >= 0:
        raise ValueError(f"concentration must be non-negative, got {s}")


def _scaled_moments(s, dim):
    """Return (I0, I1) with I_k = int tr^k exp(s (tr - tr_max)) dHaar."""
    tmax = float(dim)

    def base(w):
        return math.exp(s * (_trace_of_angle(w, dim) - tmax)) * (
            1.0 / math.pi if dim == 2 else (1.0 - math.cos(w)) / math.pi)

    i0 = integrate.quad(base, 0.0, math.pi, **_QUAD)[0]
    i1 = integrate.quad(lambda w: _trace_of_angle(w, dim) * base(w), 0.0, math.pi, **_QUAD)[0]
    return i0, i1


def mf_log_normalizer(s: float, dim: int) -> float:
    """``log c(s)`` where ``c(s) = int exp(s tr(R)) dR`` over normalized Haar."""
    _check(s, dim)
    if s == 0:
        return 0.0
    i0, _ = _scaled_moments(s, dim)
    return s * dim + math.log(i0)


def mf_log_normalizer_derivative(s: float, dim: int) -> float:
    """``d log c / ds``, i.e. ``E[tr(mode^T R)]``, as a ratio of two integrals."""
    _check(s, dim)
    if s == 0:
        return 0.0
    i0, i1 = _scaled_moments(s, dim)
    return i1 / i0


def mf_mean_coefficient(s: float, dim: int) -> float:
    """Scalar ``N(s)`` with ``E[R] = N(s) * mode``.

    By symmetry ``E[R]`` is a multiple of the mode, and taking the trace gives
    ``N(s) = E[tr(mode^T R)] / dim = (d log c / ds) / dim``.
    """
    return mf_log_normalizer_derivative(s, dim) / dim


@dataclass
class MatrixFisherParams:
    """Mode rotation and isotropic concentration.

    Build from a general parameter matrix with :meth:`from_matrix`; the mode
    is ``U V^T`` from the proper SVD and the concentration is the mean
    singular value (the isotropic part).
    """

    mode: np.ndarray
    concentration: float
    F: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.mode = check_rotation(self.mode)
        if not self.concentration >= 0:
            raise ValueError("concentration must be non-negative")
        self.concentration = float(self.concentration)

    @property
    def dim(self) -> int:
        return self.mode.shape[0]

    @classmethod
    def from_matrix(cls, F) -> "MatrixFisherParams":
        U, S, V = proper_svd(F)
        return cls(U @ V.T, max(float(S.mean()), 0.0), np.asarray(F, dtype=np.float64))


@dataclass(frozen=True)
class PriorDistribution:
    """Dataset prior over group elements: a point mass on the identity
    (``discrete-delta``) or a matrix Fisher distribution."""

    kind: str
    params: object = None

    def __post_init__(self):
        if self.kind not in ("discrete-delta", "matrix-fisher"):
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if self.kind == "matrix-fisher" and not isinstance(self.params, MatrixFisherParams):
            raise ValueError("matrix-fisher prior needs MatrixFisherParams")

    @classmethod
    def delta(cls, n: int) -> "PriorDistribution":
        return cls("discrete-delta", int(n))

    def pmf(self, k: int) -> float:
        if self.kind != "discrete-delta":
            raise TypeError("pmf is only defined for the discrete prior")
        return 1.0 if int(k) % self.params == 0 else 0.0


def mf_logpdf(R, params: MatrixFisherParams) -> float:
    R = check_rotation(R)
    if R.shape != params.mode.shape:
        raise ValueError(f"rotation {R.shape} vs mode {params.mode.shape}")
    s = params.concentration
    return s * float(np.trace(params.mode.T @ R)) - mf_log_normalizer(s, params.dim)


def mf_cross_entropy(p: MatrixFisherParams, q: MatrixFisherParams) -> float:
    """Closed-form ``E_{R ~ q}[log p(R)]``.

    Equals ``N(s_q) * s_p * tr(mode_p^T mode_q) - log c(s_p)``.
    """
    if p.dim != q.dim:
        raise ValueError(f"dimension mismatch: {p.dim} vs {q.dim}")
    sp, sq = p.concentration, q.concentration
    if sp == 0:
        return 0.0
    align = float(np.trace(p.mode.T @ q.mode))
    return mf_mean_coefficient(sq, q.dim) * sp * align - mf_log_normalizer(sp, p.dim)
