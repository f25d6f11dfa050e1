"""Rotation augmentation schedules used by the baselines."""
from __future__ import annotations

import math

import numpy as np

from ..groups.cyclic import rotate_array
from ..groups.rotations import axis_angle, sample_uniform_rotation

KINDS = ("none", "small", "full", "group")
SMALL_DEGREES = 10.0


def sample_angle(kind: str, rng: np.random.Generator, n: int = 8) -> float:
    """Rotation angle in radians drawn according to ``kind`` (planar case)."""
    if kind == "none":
        return 0.0
    if kind == "small":
        return math.radians(rng.uniform(-SMALL_DEGREES, SMALL_DEGREES))
    if kind == "full":
        return math.radians(rng.uniform(-180.0, 180.0))
    if kind == "group":
        return 2.0 * math.pi * int(rng.integers(n)) / n
    raise ValueError(f"unknown augmentation kind {kind!r}")


def sample_rotation_3d(kind: str, rng: np.random.Generator) -> np.ndarray:
    if kind == "none":
        return np.eye(3)
    if kind == "small":
        axis = rng.standard_normal(3)
        return axis_angle(axis, math.radians(rng.uniform(-SMALL_DEGREES, SMALL_DEGREES)))
    if kind in ("full", "group"):
        return sample_uniform_rotation(rng, 3)
    raise ValueError(f"unknown augmentation kind {kind!r}")


def augmentation_schedule(kind: str, rng: np.random.Generator, sample, n: int = 8, vector_labels=None):
    """Apply one random rotation drawn by ``kind`` to ``sample``.

    Images (``[..., H, W]``) rotate in the plane: ``small`` draws within
    +-10 degrees, ``full`` within +-180 degrees and ``group`` a uniform
    element of C_n. Point clouds (``[N, 3]``) rotate in 3-D, ``full`` and
    ``group`` both meaning Haar-uniform SO(3). Per-point vector labels, if
    given, rotate with the cloud; scalar per-point labels need no change.

    Returns ``(transformed, transform)`` where ``transform`` is the angle for
    images or the rotation matrix for clouds (and the rotated labels as a
    third item when ``vector_labels`` is given).
    """
    if kind not in KINDS:
        raise ValueError(f"unknown augmentation kind {kind!r}")
    x = np.asarray(sample, dtype=np.float64)
    if x.ndim == 2 and x.shape[-1] == 3 and x.shape[0] != 3:
        R = sample_rotation_3d(kind, rng)
        out = (x @ R.T, R)
        if vector_labels is not None:
            out = out + (np.asarray(vector_labels) @ R.T,)
        return out
    if kind == "group":
        k = int(rng.integers(n))
        return rotate_array(x, k=k, n=n), 2.0 * math.pi * k / n
    angle = sample_angle(kind, rng, n)
    if angle == 0.0:
        return x.copy(), 0.0
    return rotate_array(x, angle), angle


def augment_batch(kind: str, rng: np.random.Generator, batch: np.ndarray, n: int = 8) -> np.ndarray:
    if kind == "none":
        return batch
    return np.stack([augmentation_schedule(kind, rng, b, n)[0] for b in batch])
