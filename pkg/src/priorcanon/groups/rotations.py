"""Rotation matrices in SO(2)/SO(3): validity, sampling, Gram-Schmidt, proper SVD."""
from __future__ import annotations

import math

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Tensor, as_tensor
from ..errors import DegenerateInputError, InvalidRotationError, ShapeError

ROTATION_TOL = 1e-9
DEGENERATE_TOL = 1e-8


def is_rotation(R, tol: float = ROTATION_TOL) -> bool:
    R = np.asarray(R, dtype=np.float64)
    if R.ndim < 2 or R.shape[-1] != R.shape[-2] or R.shape[-1] not in (2, 3):
        return False
    eye = np.eye(R.shape[-1])
    ortho = np.abs(np.swapaxes(R, -1, -2) @ R - eye).max() <= tol
    return bool(ortho and np.abs(np.linalg.det(R) - 1.0).max() <= tol)


def check_rotation(R, tol: float = ROTATION_TOL) -> np.ndarray:
    """Return ``R`` as an array, raising :class:`InvalidRotationError` if it
    is not orthogonal with determinant +1 within ``tol``."""
    R = np.asarray(R, dtype=np.float64)
    if not is_rotation(R, tol):
        raise InvalidRotationError(f"not a rotation within {tol}: {R!r}")
    return R


def rotation_2d(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def axis_angle(axis, angle: float) -> np.ndarray:
    """Rodrigues' formula for a rotation by ``angle`` about ``axis``."""
    a = np.asarray(axis, dtype=np.float64)
    a = a / np.linalg.norm(a)
    K = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * (K @ K)


def rotation_angle(R) -> np.ndarray:
    """Geodesic angle to the identity, in ``[0, pi]``."""
    R = np.asarray(R)
    n = R.shape[-1]
    tr = np.trace(R, axis1=-2, axis2=-1)
    cos = (tr - (n - 2)) / 2.0
    return np.arccos(np.clip(cos, -1.0, 1.0))


def rotate_points(points, R):
    """Apply ``p -> R p`` to every row of ``points`` ``[N, dim]``.

    Works on arrays or tensors (differentiable in both arguments).
    """
    dim_p = points.shape[-1]
    R_shape = R.shape
    if R_shape[-1] != R_shape[-2] or R_shape[-1] != dim_p:
        raise ShapeError(f"points of dim {dim_p} with rotation {R_shape}")
    if isinstance(points, Tensor) or isinstance(R, Tensor):
        return ops.matmul(as_tensor(points), ops.transpose(as_tensor(R), _swap_last(len(R_shape))))
    return np.asarray(points, dtype=np.float64) @ np.swapaxes(np.asarray(R, dtype=np.float64), -1, -2)


def _swap_last(ndim):
    axes = list(range(ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return tuple(axes)


def sample_uniform_rotation(rng: np.random.Generator, dim: int, size=None) -> np.ndarray:
    """Haar-uniform rotation(s).

    dim 2: angle uniform on [0, 2*pi). dim 3: QR of a Gaussian matrix with
    the diagonal of R made positive, then a column flip if det < 0.
    """
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")
    batch = () if size is None else (size,) if isinstance(size, int) else tuple(size)
    if dim == 2:
        theta = rng.uniform(0.0, 2.0 * math.pi, size=batch)
        c, s = np.cos(theta), np.sin(theta)
        return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)
    A = rng.standard_normal(batch + (3, 3))
    Q, Rr = np.linalg.qr(A)
    d = np.sign(np.diagonal(Rr, axis1=-2, axis2=-1))
    d = np.where(d == 0, 1.0, d)
    Q = Q * d[..., None, :]
    det = np.linalg.det(Q)
    Q[..., :, 0] *= np.sign(det)[..., None] if batch else np.sign(det)
    return Q


def gram_schmidt_rotation(vectors, tol: float = DEGENERATE_TOL) -> Tensor:
    """Orthonormalize the rows of ``vectors`` ``[dim, dim]`` (or ``[B, dim, dim]``).

    Row 0 is normalized; in 3-D row 1 is orthogonalized against it and row 2
    is the cross product, in 2-D row 1 is the perpendicular of row 0. The
    result always has determinant +1 and satisfies
    ``gs(V @ Q.T) == gs(V) @ Q.T`` for any rotation ``Q``.
    """
    V = as_tensor(vectors)
    dim = V.shape[-1]
    if dim not in (2, 3) or V.shape[-2] != dim:
        raise ShapeError(f"expected [..., dim, dim] with dim in (2, 3), got {V.shape}")
    single = V.ndim == 2
    if single:
        V = ops.reshape(V, (1, dim, dim))
    v1 = V[:, 0, :]
    n1 = ops.sqrt(ops.sum(v1 * v1, axes=-1, keepdims=True))
    if (n1.data <= tol).any():
        raise DegenerateInputError("first vector has (near) zero norm")
    e1 = v1 / n1
    if dim == 2:
        e2 = ops.stack([-e1[:, 1], e1[:, 0]], axis=-1)
        rows = [e1, e2]
    else:
        v2 = V[:, 1, :]
        u2 = v2 - ops.sum(v2 * e1, axes=-1, keepdims=True) * e1
        n2 = ops.sqrt(ops.sum(u2 * u2, axes=-1, keepdims=True))
        if (n2.data <= tol * np.maximum(1.0, np.linalg.norm(V.data[:, 1, :], axis=-1, keepdims=True))).any():
            raise DegenerateInputError("vectors are (near) linearly dependent")
        e2 = u2 / n2
        e3 = ops.stack([
            e1[:, 1] * e2[:, 2] - e1[:, 2] * e2[:, 1],
            e1[:, 2] * e2[:, 0] - e1[:, 0] * e2[:, 2],
            e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0],
        ], axis=-1)
        rows = [e1, e2, e3]
    out = ops.stack(rows, axis=1)
    return ops.reshape(out, (dim, dim)) if single else out


def proper_svd(F):
    """SVD ``F = U diag(S) V^T`` with ``det U = det V = +1``.

    Singular values are sorted descending; a reflection is absorbed by
    negating the last one. ``U @ V.T`` is the matrix Fisher mode.
    """
    F = np.asarray(F, dtype=np.float64)
    if F.ndim != 2 or F.shape[0] != F.shape[1] or F.shape[0] not in (2, 3):
        raise ShapeError(f"proper_svd needs a 2x2 or 3x3 matrix, got {F.shape}")
    if not np.isfinite(F).all():
        raise ValueError("non-finite entries in F")
    U, S, Vt = np.linalg.svd(F)
    V = Vt.T
    du, dv = np.sign(np.linalg.det(U)), np.sign(np.linalg.det(V))
    U = U.copy()
    V = V.copy()
    S = S.copy()
    U[:, -1] *= du
    V[:, -1] *= dv
    S[-1] *= du * dv
    return U, S, V
