"""Dataset containers and procedural toy data in a fixed canonical orientation."""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ShapeError
from ..groups.cyclic import disk_mask, rotate_array

# Stroke motifs as polylines in (row, col) coordinates on [-1, 1]. None of
# them maps onto itself (or onto another motif) under a nontrivial C8
# rotation; ``prototype_asymmetry`` checks this.
GLYPHS = (
    [[(-0.6, -0.3), (0.6, -0.3), (0.6, 0.4)]],                               # L
    [[(-0.6, -0.5), (-0.6, 0.5)], [(-0.6, 0.0), (0.6, 0.0)]],               # T
    [[(0.6, 0.0), (-0.6, 0.0)], [(-0.2, -0.35), (-0.6, 0.0), (-0.2, 0.35)]],  # arrow
    [[(-0.6, 0.4), (-0.6, -0.3), (0.6, -0.3)], [(0.0, -0.3), (0.0, 0.2)]],   # F
    [[(-0.6, 0.2), (0.4, 0.2), (0.6, -0.1), (0.4, -0.4)]],                  # hook
    [[(-0.6, -0.4), (-0.6, 0.4), (0.6, -0.1)]],                             # 7
    [[(0.6, -0.3), (-0.6, -0.3), (-0.6, 0.3), (0.0, 0.3), (0.0, -0.3)]],     # P
    [[(0.6, 0.1), (0.0, 0.1)], [(-0.6, -0.4), (0.0, 0.1), (-0.5, 0.5)]],     # Y
    [[(-0.6, -0.5), (-0.6, 0.1), (0.5, 0.1)], [(0.2, -0.45), (0.45, -0.45)]],  # corner and tick
    [[(-0.6, 0.4), (-0.6, -0.3), (0.6, -0.3), (0.6, 0.4)], [(0.0, -0.3), (0.0, 0.3)]],  # E
)
STROKE_WIDTH = 0.09  # Gaussian stroke sigma as a fraction of the half-size


@dataclass
class ImageDataset:
    """Images ``[N, C, H, W]`` in ``[0, 1]`` with integer labels ``[N]``."""

    images: np.ndarray
    labels: np.ndarray
    n_classes: int
    name: str = "images"
    canonical: bool = True

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4:
            raise ShapeError(f"images must be [N, C, H, W], got {self.images.shape}")
        if self.images.shape[-1] != self.images.shape[-2]:
            raise ShapeError("images must be square")
        if self.labels.shape != (self.images.shape[0],):
            raise ShapeError("one label per image required")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError("labels outside [0, n_classes)")

    def __len__(self) -> int:
        return self.images.shape[0]

    @property
    def size(self) -> int:
        return self.images.shape[-1]

    def subset(self, index) -> "ImageDataset":
        return ImageDataset(self.images[index], self.labels[index], self.n_classes, self.name, self.canonical)

    def split(self, n_first: int):
        return self.subset(slice(0, n_first)), self.subset(slice(n_first, None))


@dataclass
class PointDataset:
    """Centered clouds ``[N, P, 3]`` with class labels ``[N]`` and optional
    per-point part labels ``[N, P]``."""

    clouds: np.ndarray
    labels: np.ndarray
    n_classes: int
    part_labels: Optional[np.ndarray] = None
    n_parts: int = 0
    name: str = "points"
    canonical: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        clouds = np.asarray(self.clouds, dtype=np.float64)
        if clouds.ndim != 3 or clouds.shape[-1] != 3:
            raise ShapeError(f"clouds must be [N, P, 3], got {clouds.shape}")
        mean = clouds.mean(axis=1, keepdims=True)
        # skip already-centered clouds so that save/load round-trips exactly
        self.clouds = clouds - mean if np.abs(mean).max(initial=0.0) > 1e-12 else clouds
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.shape != (clouds.shape[0],):
            raise ShapeError("one label per cloud required")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError("labels outside [0, n_classes)")
        if self.part_labels is not None:
            self.part_labels = np.asarray(self.part_labels, dtype=np.int64)
            if self.part_labels.shape != clouds.shape[:2]:
                raise ShapeError("part labels must be [N, P]")

    def __len__(self) -> int:
        return self.clouds.shape[0]

    def subset(self, index) -> "PointDataset":
        parts = None if self.part_labels is None else self.part_labels[index]
        return PointDataset(self.clouds[index], self.labels[index], self.n_classes, parts, self.n_parts,
                            self.name, self.canonical)

    def split(self, n_first: int):
        return self.subset(slice(0, n_first)), self.subset(slice(n_first, None))


# -- glyph images -----------------------------------------------------------

def _segment_distance(py, px, a, b):
    ay, ax = a
    by, bx = b
    dy, dx = by - ay, bx - ax
    denom = dy * dy + dx * dx
    t = np.clip(((py - ay) * dy + (px - ax) * dx) / denom, 0.0, 1.0)
    return np.hypot(py - (ay + t * dy), px - (ax + t * dx))


def render_glyph(strokes, size: int, width: float = STROKE_WIDTH) -> np.ndarray:
    """Rasterize polylines given on ``[-1, 1]^2`` as Gaussian-profile strokes."""
    half = (size - 1) / 2.0
    grid = (np.arange(size) - half) / half
    py, px = np.meshgrid(grid, grid, indexing="ij")
    dist = np.full((size, size), np.inf)
    for line in strokes:
        for a, b in zip(line[:-1], line[1:]):
            dist = np.minimum(dist, _segment_distance(py, px, a, b))
    return np.exp(-0.5 * (dist / width) ** 2)


def glyph_prototypes(n_classes: int = 10, size: int = 28) -> np.ndarray:
    """Noise-free class prototypes ``[n_classes, size, size]``."""
    if not 1 <= n_classes <= len(GLYPHS):
        raise ValueError(f"n_classes must be in [1, {len(GLYPHS)}]")
    mask = disk_mask(size, 1.0)
    return np.stack([render_glyph(GLYPHS[c], size) * mask for c in range(n_classes)])


def prototype_asymmetry(prototypes: np.ndarray, n: int = 8) -> np.ndarray:
    """Smallest relative distance ``||x - rho(g) x|| / ||x||`` over ``g != e``, per prototype."""
    out = []
    for p in prototypes:
        norm = np.linalg.norm(p)
        out.append(min(np.linalg.norm(p - rotate_array(p, k=g, n=n)) / norm for g in range(1, n)))
    return np.array(out)


def generate_toy_images(seed: int, n_samples: int, n_classes: int = 10, size: int = 28,
                        jitter: float = 0.04, noise: float = 0.03) -> ImageDataset:
    """Balanced glyph images in the canonical (upright) orientation.

    Each sample perturbs the stroke endpoints and the glyph's scale and
    position slightly, then adds pixel noise inside the disk. Everything
    outside the inscribed disk stays zero so that rotations lose no content.
    """
    if size < 16:
        raise ValueError("size must be at least 16")
    if not 1 <= n_classes <= len(GLYPHS):
        raise ValueError(f"n_classes must be in [1, {len(GLYPHS)}]")
    rng = np.random.default_rng(seed)
    labels = np.arange(n_samples) % n_classes
    rng.shuffle(labels)
    mask = disk_mask(size, 1.0)
    images = np.empty((n_samples, 1, size, size))
    for i, c in enumerate(labels):
        scale = rng.uniform(0.9, 1.1)
        shift = rng.uniform(-0.05, 0.05, size=2)
        strokes = []
        for line in GLYPHS[c]:
            pts = np.asarray(line) * scale + shift + rng.normal(0.0, jitter, size=(len(line), 2))
            strokes.append([tuple(p) for p in pts])
        img = render_glyph(strokes, size) + noise * rng.standard_normal((size, size))
        images[i, 0] = np.clip(img, 0.0, 1.0) * mask
    return ImageDataset(images, labels, n_classes, name=f"glyphs-{seed}")


# -- point clouds -----------------------------------------------------------

def _bent_prism(rng, n):
    u = rng.uniform(-1, 1, n)
    v = rng.uniform(-0.25, 0.25, n)
    w = rng.uniform(-0.12, 0.12, n)
    pts = np.stack([u, v + 0.45 * u ** 2, w + 0.2 * u], -1)
    parts = (u > 0.3).astype(int) + (u > -0.3).astype(int)
    return pts, parts


def _tapered_helix(rng, n):
    t = rng.uniform(0, 3 * np.pi, n)
    r = 0.6 * (1.0 - 0.25 * t / (3 * np.pi))
    pts = np.stack([r * np.cos(t), r * np.sin(t), 0.16 * t], -1)
    pts += rng.normal(0, 0.04, pts.shape)
    parts = np.minimum((t / np.pi).astype(int), 2)
    return pts, parts


def _tripod(rng, n):
    arm = rng.integers(0, 3, n)
    lengths = np.array([1.2, 0.8, 0.5])
    dirs = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.3, 0.2, 1.0]])
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    s = rng.uniform(0, 1, n) * lengths[arm]
    pts = s[:, None] * dirs[arm] + rng.normal(0, 0.05, (n, 3))
    return pts, arm


def _cone_and_ball(rng, n):
    which = (rng.uniform(size=n) < 0.35).astype(int)
    h = rng.uniform(0, 1, n)
    ang = rng.uniform(0, 2 * np.pi, n)
    cone = np.stack([0.4 * (1 - h) * np.cos(ang), 0.4 * (1 - h) * np.sin(ang), 1.2 * h - 0.4], -1)
    d = rng.normal(size=(n, 3))
    ball = 0.25 * d / np.linalg.norm(d, axis=1, keepdims=True) + np.array([0.55, 0.2, -0.3])
    return np.where(which[:, None] == 1, ball, cone), which


def _twisted_plank(rng, n):
    u = rng.uniform(-1, 1, n)
    v = rng.uniform(-0.3, 0.3, n)
    a = 0.6 * (u + 1)
    pts = np.stack([u, v * np.cos(a), v * np.sin(a) + 0.25 * (u > 0.5)], -1)
    parts = (u > 0.5).astype(int) + (u > -0.2).astype(int)
    return pts, parts


def _wedge(rng, n):
    x = rng.uniform(0, 1, n)
    y = rng.uniform(0, 1, n) * (1 - x)
    z = rng.uniform(0, 0.3, n) + 0.4 * x * y
    pts = np.stack([1.4 * x, 0.9 * y, z], -1)
    parts = (x > 0.5).astype(int) + (y > 0.3).astype(int)
    return pts, parts


SHAPES = (_bent_prism, _tapered_helix, _tripod, _cone_and_ball, _twisted_plank, _wedge)
N_PARTS = 3


def generate_toy_pointclouds(seed: int, n_samples: int, n_classes: int = 4, points_per_cloud: int = 128,
                             noise: float = 0.02) -> PointDataset:
    """Balanced chiral/asymmetric 3-D shapes in canonical pose with part labels."""
    if points_per_cloud < 64:
        raise ValueError("points_per_cloud must be at least 64")
    if not 1 <= n_classes <= len(SHAPES):
        raise ValueError(f"n_classes must be in [1, {len(SHAPES)}]")
    rng = np.random.default_rng(seed)
    labels = np.arange(n_samples) % n_classes
    rng.shuffle(labels)
    clouds = np.empty((n_samples, points_per_cloud, 3))
    parts = np.empty((n_samples, points_per_cloud), dtype=np.int64)
    for i, c in enumerate(labels):
        pts, part = SHAPES[c](rng, points_per_cloud)
        pts = pts * rng.uniform(0.9, 1.1, size=3) + rng.normal(0, noise, pts.shape)
        clouds[i] = pts
        parts[i] = part
    return PointDataset(clouds, labels, n_classes, parts, N_PARTS, name=f"shapes-{seed}")


# -- persistence and config-driven construction -----------------------------

def save_point_dataset(path: str, dataset: PointDataset) -> None:
    """Write clouds, labels and part labels to an uncompressed ``.npz`` (atomic)."""
    arrays = {"clouds": dataset.clouds, "labels": dataset.labels,
              "n_classes": np.array(dataset.n_classes), "n_parts": np.array(dataset.n_parts)}
    if dataset.part_labels is not None:
        arrays["part_labels"] = dataset.part_labels
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        np.savez(fh, **arrays)
    os.replace(tmp, path)


def load_point_dataset(path: str) -> PointDataset:
    with np.load(path, allow_pickle=False) as data:
        parts = data["part_labels"] if "part_labels" in data.files else None
        return PointDataset(data["clouds"], data["labels"], int(data["n_classes"]), parts,
                            int(data["n_parts"]), name=os.path.basename(path))


def datasets_for_config(config):
    """Procedural ``(train, test)`` sets for a :class:`TrainConfig`.

    The two splits use seeds ``2 * data_seed`` and ``2 * data_seed + 1`` so
    that no two data seeds share a split.
    """
    s_train, s_test = 2 * config.data_seed, 2 * config.data_seed + 1
    if config.task == "images":
        make = lambda s, n: generate_toy_images(s, n, config.n_classes, config.image_size)  # noqa: E731
    else:
        make = lambda s, n: generate_toy_pointclouds(s, n, config.n_classes, config.points_per_cloud)  # noqa: E731
    return make(s_train, config.n_train), make(s_test, config.n_test)
