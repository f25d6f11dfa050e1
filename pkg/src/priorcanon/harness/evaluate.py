"""Evaluation on original and group-transformed test sets."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from ..autodiff.tensor import no_grad
from ..canon import DiscreteCanonOutput
from ..groups.cyclic import rotate_array
from ..groups.rotations import rotation_angle, sample_uniform_rotation
from .models import ModelBundle

ANGLE_BINS = 12
IDENTITY_ANGLE = math.radians(10.0)


@dataclass
class EvalReport:
    """Accuracy on the test set and on its group-expanded version.

    For cyclic groups ``g_avg_accuracy`` averages over exactly ``n`` rotated
    copies of every test input and ``per_element_accuracy[g]`` is the
    accuracy on copies rotated by ``g``. ``identity_fraction`` and
    ``angle_histogram`` describe the canonicalizer's choices on the
    untransformed inputs; for point clouds the histogram bins the rotation
    angle of ``R_c`` over ``[0, pi]`` and "identity" means an angle under 10
    degrees. ``orbit_agreement`` is the fraction of test inputs whose
    predicted class is the same for every transformed copy, and
    ``max_orbit_logit_gap`` the largest logit deviation within an orbit.
    """

    accuracy: float
    g_avg_accuracy: float
    identity_fraction: Optional[float]
    angle_histogram: Optional[List[int]]
    per_element_accuracy: List[float] = field(default_factory=list)
    orbit_agreement: float = 1.0
    max_orbit_logit_gap: float = 0.0
    n_test: int = 0
    group: str = ""

    @property
    def gap(self) -> float:
        return self.accuracy - self.g_avg_accuracy

    def to_dict(self) -> dict:
        return asdict(self)


def _batched(fn, X, batch: int = 64):
    return np.concatenate([fn(X[i:i + batch]) for i in range(0, X.shape[0], batch)], axis=0)


def predict_logits(bundle: ModelBundle, X: np.ndarray, batch: int = 64) -> np.ndarray:
    with no_grad():
        return _batched(lambda xb: bundle(xb).data, X, batch)


def canonical_elements(bundle: ModelBundle, X: np.ndarray, batch: int = 64) -> np.ndarray:
    """Selected element index (images) or rotation matrix (points) per input."""
    def one(xb):
        out = bundle.canonicalize(xb)
        if isinstance(out, DiscreteCanonOutput):
            return out.selected
        return out.rotation.data
    with no_grad():
        return _batched(one, X, batch)


def evaluate(bundle: ModelBundle, dataset, group_order: Optional[int] = None, n_rotations: int = 4,
             seed: int = 0) -> EvalReport:
    """Evaluate ``bundle`` on ``dataset`` and its group-expanded copy.

    Images use the cyclic group of order ``group_order`` (default: the
    config's). Point clouds use ``n_rotations`` Haar-random rotations per
    cloud drawn from ``seed``.
    """
    if len(dataset) == 0:
        raise ValueError("empty test set")
    bundle.eval()
    y = dataset.labels
    if hasattr(dataset, "images"):
        return _evaluate_images(bundle, dataset.images, y, group_order or bundle.config.group_order)
    return _evaluate_points(bundle, dataset.clouds, y, n_rotations, seed)


def _evaluate_images(bundle, X, y, n) -> EvalReport:
    base = predict_logits(bundle, X)
    preds, per_elem, gaps = [], [], np.zeros(len(y))
    for g in range(n):
        logits = base if g == 0 else predict_logits(bundle, rotate_array(X, k=g, n=n))
        p = logits.argmax(-1)
        preds.append(p)
        per_elem.append(float((p == y).mean()))
        gaps = np.maximum(gaps, np.abs(logits - base).max(-1))
    preds = np.stack(preds)
    agree = float((preds == preds[0]).all(axis=0).mean())
    ident, hist = None, None
    if bundle.has_canonicalizer:
        sel = canonical_elements(bundle, X)
        hist = np.bincount(sel, minlength=n).astype(int).tolist()
        ident = float((sel == 0).mean())
    return EvalReport(per_elem[0], float(np.mean(per_elem)), ident, hist, per_elem, agree,
                      float(gaps.max()), len(y), f"C{n}")


def _evaluate_points(bundle, X, y, n_rotations, seed) -> EvalReport:
    rng = np.random.default_rng(seed)
    base = predict_logits(bundle, X)
    acc = float((base.argmax(-1) == y).mean())
    preds, per_rot, gaps = [base.argmax(-1)], [], np.zeros(len(y))
    for _ in range(n_rotations):
        R = sample_uniform_rotation(rng, 3, size=len(y))
        logits = predict_logits(bundle, np.einsum("bnj,bij->bni", X, R))
        p = logits.argmax(-1)
        preds.append(p)
        per_rot.append(float((p == y).mean()))
        gaps = np.maximum(gaps, np.abs(logits - base).max(-1))
    preds = np.stack(preds)
    agree = float((preds == preds[0]).all(axis=0).mean())
    ident, hist = None, None
    if bundle.has_canonicalizer:
        angles = rotation_angle(canonical_elements(bundle, X))
        hist = np.histogram(angles, bins=ANGLE_BINS, range=(0.0, math.pi))[0].astype(int).tolist()
        ident = float((angles < IDENTITY_ANGLE).mean())
    return EvalReport(acc, float(np.mean(per_rot)), ident, hist, per_rot, agree, float(gaps.max()),
                      len(y), "SO(3)")
