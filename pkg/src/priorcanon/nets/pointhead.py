"""Rotation-equivariant vector head for point clouds.

The head emits three vectors ``v_k = (1/N) sum_i w_k(f_i) p_i`` where the
per-point weights depend only on rotation-invariant features ``f_i``. Rotating
the cloud by ``Q`` therefore maps the vector matrix ``V`` to ``V @ Q.T``.
"""
from __future__ import annotations

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Tensor, as_tensor
from ..errors import DegenerateInputError, ShapeError
from .module import Linear, Module

N_FEATURES = 5


def invariant_point_features(points) -> np.ndarray:
    """Per-point rotation-invariant features, scale-normalized by the RMS radius.

    Columns: radius, mean distance to the other points, and the three
    coordinates along the principal axes with each axis oriented so that the
    third moment along it is non-negative (this fixes the eigenvector sign
    without reference to a world frame).
    """
    P = np.asarray(points.data if isinstance(points, Tensor) else points, dtype=np.float64)
    single = P.ndim == 2
    if single:
        P = P[None]
    if P.ndim != 3 or P.shape[-1] != 3:
        raise ShapeError(f"expected [B, N, 3] points, got {P.shape}")
    if P.shape[1] < 3:
        raise ShapeError("need at least 3 points")
    rms = np.sqrt((P * P).sum(-1).mean(-1))  # [B]
    if (rms < 1e-12).any():
        raise DegenerateInputError("all points coincide")
    Pn = P / rms[:, None, None]
    radius = np.linalg.norm(Pn, axis=-1)
    diff = Pn[:, :, None, :] - Pn[:, None, :, :]
    mean_dist = np.linalg.norm(diff, axis=-1).mean(-1)
    cov = np.einsum("bni,bnj->bij", Pn, Pn) / Pn.shape[1]
    _, evecs = np.linalg.eigh(cov)
    evecs = evecs[:, :, ::-1]  # descending variance
    coords = np.einsum("bni,bik->bnk", Pn, evecs)
    skew = (coords ** 3).sum(1)
    sign = np.where(skew < 0, -1.0, 1.0)
    coords = coords * sign[:, None, :]
    feats = np.concatenate([radius[..., None], mean_dist[..., None], coords], axis=-1)
    return feats[0] if single else feats


class PointCanonicalizer(Module):
    """Invariant-feature MLP producing three equivariant vectors per cloud."""

    def __init__(self, rng, hidden: int = 32, n_vectors: int = 3):
        super().__init__()
        self.fc1 = self.add_child("fc1", Linear(rng, N_FEATURES, hidden))
        self.fc2 = self.add_child("fc2", Linear(rng, hidden, hidden))
        self.out = self.add_child("out", Linear(rng, hidden, n_vectors))

    def point_weights(self, feats) -> Tensor:
        h = ops.relu(self.fc1(Tensor(feats)))
        h = ops.relu(self.fc2(h))
        return self.out(h)  # [B, N, 3]

    def forward(self, points) -> Tensor:
        return vector_head_points(points, self)


def vector_head_points(points, head: PointCanonicalizer) -> Tensor:
    """``V[b] = W[b]^T P[b] / N`` with invariant per-point weights ``W``.

    ``points`` is a centered cloud ``[N, 3]`` or batch ``[B, N, 3]``; returns
    ``[3, 3]`` or ``[B, 3, 3]`` with one vector per row.
    """
    P = as_tensor(points)
    single = P.ndim == 2
    if single:
        P = ops.reshape(P, (1,) + P.shape)
    feats = invariant_point_features(P)
    w = head.point_weights(feats)
    V = ops.matmul(ops.transpose(w, (0, 2, 1)), P) / P.shape[1]
    return ops.reshape(V, V.shape[1:]) if single else V


class FixedPointCanonicalizer(Module):
    """Emits the identity vectors for every cloud (canonical form = input)."""

    def forward(self, points) -> Tensor:
        P = as_tensor(points)
        if P.ndim == 2:
            return Tensor(np.eye(3))
        return Tensor(np.tile(np.eye(3), (P.shape[0], 1, 1)))
