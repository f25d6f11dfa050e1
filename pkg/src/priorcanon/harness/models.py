"""Prediction networks and the bundle pairing them with a canonicalizer."""
from __future__ import annotations

from typing import Dict, Optional

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Tensor, as_tensor
from ..canon import canonicalize, canonicalized_forward
from ..config import TrainConfig
from ..errors import ShapeError
from ..nets.gconv import FixedCanonicalizer, GroupCanonicalizer
from ..nets.module import Conv2d, Linear, Module
from ..nets.pointhead import FixedPointCanonicalizer, PointCanonicalizer


class ImageClassifier(Module):
    """Three conv blocks and a linear head; deliberately not rotation-robust.

    ``conv-relu-pool, conv-relu-pool, conv-relu, flatten, linear``. The input
    size must be a multiple of 4.
    """

    def __init__(self, rng, n_classes: int, size: int = 28, in_channels: int = 1, width: int = 8):
        super().__init__()
        if size % 4:
            raise ValueError("image size must be a multiple of 4")
        self.size = size
        self.conv1 = self.add_child("conv1", Conv2d(rng, in_channels, width, 3))
        self.conv2 = self.add_child("conv2", Conv2d(rng, width, 2 * width, 3))
        self.conv3 = self.add_child("conv3", Conv2d(rng, 2 * width, 2 * width, 3))
        self.fc = self.add_child("fc", Linear(rng, 2 * width * (size // 4) ** 2, n_classes))

    def forward(self, x) -> Tensor:
        x = as_tensor(x)
        single = x.ndim == 3
        if single:
            x = ops.reshape(x, (1,) + x.shape)
        if x.shape[-1] != self.size or x.shape[-2] != self.size:
            raise ShapeError(f"expected {self.size}x{self.size} images, got {x.shape}")
        h = ops.avg_pool2(ops.relu(self.conv1(x)))
        h = ops.avg_pool2(ops.relu(self.conv2(h)))
        h = ops.relu(self.conv3(h))
        logits = self.fc(ops.reshape(h, (h.shape[0], -1)))
        return ops.reshape(logits, logits.shape[1:]) if single else logits


class PointClassifier(Module):
    """Shared per-point MLP, max-pool over points, MLP head (not rotation-invariant)."""

    def __init__(self, rng, n_classes: int, hidden: int = 32):
        super().__init__()
        self.p1 = self.add_child("p1", Linear(rng, 3, hidden))
        self.p2 = self.add_child("p2", Linear(rng, hidden, hidden))
        self.h1 = self.add_child("h1", Linear(rng, hidden, hidden))
        self.h2 = self.add_child("h2", Linear(rng, hidden, n_classes))

    def point_features(self, P: Tensor) -> Tensor:
        return ops.relu(self.p2(ops.relu(self.p1(P))))

    def forward(self, points) -> Tensor:
        P = as_tensor(points)
        single = P.ndim == 2
        if single:
            P = ops.reshape(P, (1,) + P.shape)
        pooled, _ = ops.reduce("max", self.point_features(P), axes=1)
        logits = self.h2(ops.relu(self.h1(pooled)))
        return ops.reshape(logits, logits.shape[1:]) if single else logits


class PointSegmenter(PointClassifier):
    """Per-point logits from the point feature concatenated with the pooled feature."""

    def __init__(self, rng, n_parts: int, hidden: int = 32):
        super().__init__(rng, n_parts, hidden)
        self.seg = self.add_child("seg", Linear(rng, 2 * hidden, n_parts))

    def forward(self, points) -> Tensor:
        P = as_tensor(points)
        single = P.ndim == 2
        if single:
            P = ops.reshape(P, (1,) + P.shape)
        f = self.point_features(P)
        pooled, _ = ops.reduce("max", f, axes=1, keepdims=True)
        glob = pooled * np.ones((1, f.shape[1], 1))
        out = self.seg(ops.concat([f, glob], axis=-1))
        return ops.reshape(out, out.shape[1:]) if single else out


def build_image_classifier(config: TrainConfig, rng=None) -> ImageClassifier:
    rng = np.random.default_rng(config.seed) if rng is None else rng
    return ImageClassifier(rng, config.n_classes, config.image_size, 1, config.predictor_width)


def build_point_classifier(config: TrainConfig, rng=None) -> PointClassifier:
    rng = np.random.default_rng(config.seed) if rng is None else rng
    return PointClassifier(rng, config.n_classes, config.point_hidden)


class ModelBundle(Module):
    """A predictor with an optional canonicalizer and the config that built them."""

    def __init__(self, config: TrainConfig, predictor: Module, canonicalizer: Optional[Module] = None):
        super().__init__()
        self.config = config
        self.predictor = self.add_child("predictor", predictor)
        self.canonicalizer = None
        if canonicalizer is not None:
            self.canonicalizer = self.add_child("canonicalizer", canonicalizer)

    @property
    def has_canonicalizer(self) -> bool:
        return self.canonicalizer is not None

    def forward(self, x, return_canon: bool = False):
        if self.canonicalizer is None:
            y = self.predictor(x)
            return (y, None) if return_canon else y
        return canonicalized_forward(x, self.canonicalizer, self.predictor, "trivial", return_canon)

    def canonicalize(self, x):
        if self.canonicalizer is None:
            raise ValueError("bundle has no canonicalizer")
        return canonicalize(x, self.canonicalizer)

    def predictor_state(self) -> Dict[str, np.ndarray]:
        return {k: v for k, v in self.state_dict().items() if k.startswith("predictor.")}


def build_bundle(config: TrainConfig, canonicalizer: Optional[Module] = None) -> ModelBundle:
    """Deterministically build the networks for ``config``.

    The canonicalizer is built first from ``seed``; the predictor uses an
    independent stream so its initial weights do not depend on whether a
    canonicalizer exists.
    """
    canon_rng = np.random.default_rng([config.seed, 1])
    pred_rng = np.random.default_rng([config.seed, 2])
    if config.task == "images":
        predictor = build_image_classifier(config, pred_rng)
        if canonicalizer is None and config.uses_canonicalizer:
            canonicalizer = GroupCanonicalizer(canon_rng, config.group_order, 1, config.canon_hidden,
                                               config.canon_depth, config.canon_kernel)
    else:
        predictor = build_point_classifier(config, pred_rng)
        if canonicalizer is None and config.uses_canonicalizer:
            canonicalizer = PointCanonicalizer(canon_rng, config.point_hidden)
    return ModelBundle(config, predictor, canonicalizer)


def identity_canonicalizer(config: TrainConfig) -> Module:
    """Frozen canonicalizer that maps every input to the identity element."""
    if config.task == "images":
        return FixedCanonicalizer(config.group_order)
    return FixedPointCanonicalizer()
