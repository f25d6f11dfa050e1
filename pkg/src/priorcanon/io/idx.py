"""IDX files (the MNIST container): big-endian header, unsigned-byte payload.

Layout: ``u32 magic`` (``0x00000803`` for 3-d image stacks, ``0x00000801``
for label vectors), one ``u32`` per dimension, then the bytes in row-major
order.
"""
from __future__ import annotations

import os
import struct

import numpy as np

from ..errors import FormatError
from .datasets import ImageDataset

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


def _read(path: str) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def _parse(blob: bytes, magic: int, ndim: int, what: str) -> np.ndarray:
    if len(blob) < 4:
        raise FormatError("truncated", f"{what}: missing magic number")
    (found,) = struct.unpack(">I", blob[:4])
    if found != magic:
        raise FormatError("bad-magic", f"{what}: expected 0x{magic:08x}, found 0x{found:08x}")
    header = 4 + 4 * ndim
    if len(blob) < header:
        raise FormatError("truncated", f"{what}: header cut short")
    dims = struct.unpack(f">{ndim}I", blob[4:header])
    count = int(np.prod(dims))
    if len(blob) < header + count:
        raise FormatError("truncated", f"{what}: expected {count} data bytes, found {len(blob) - header}")
    if len(blob) > header + count:
        raise FormatError("truncated", f"{what}: {len(blob) - header - count} trailing bytes")
    return np.frombuffer(blob, dtype=np.uint8, count=count, offset=header).reshape(dims)


def read_idx_images(path: str) -> np.ndarray:
    """Raw ``uint8`` images ``[N, H, W]``."""
    return _parse(_read(path), IMAGES_MAGIC, 3, os.path.basename(path))


def read_idx_labels(path: str) -> np.ndarray:
    return _parse(_read(path), LABELS_MAGIC, 1, os.path.basename(path))


def load_idx(images_path: str, labels_path: str, n_classes: int = None) -> ImageDataset:
    """Load an IDX image/label pair as an :class:`ImageDataset` scaled to ``[0, 1]``."""
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise FormatError("count-mismatch", f"{images.shape[0]} images vs {labels.shape[0]} labels")
    if n_classes is None:
        n_classes = int(labels.max()) + 1 if labels.size else 1
    return ImageDataset(images[:, None].astype(np.float64) / 255.0, labels.astype(np.int64), n_classes,
                        name=os.path.basename(images_path))


def encode_idx(array: np.ndarray) -> bytes:
    a = np.asarray(array)
    if a.dtype != np.uint8:
        raise TypeError("IDX payload must be uint8")
    if a.ndim == 3:
        magic = IMAGES_MAGIC
    elif a.ndim == 1:
        magic = LABELS_MAGIC
    else:
        raise ValueError("IDX writer supports [N, H, W] images or [N] labels")
    return struct.pack(f">I{a.ndim}I", magic, *a.shape) + np.ascontiguousarray(a).tobytes()


def write_idx(path: str, array: np.ndarray) -> None:
    blob = encode_idx(array)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


def save_idx_dataset(dataset: ImageDataset, images_path: str, labels_path: str) -> None:
    """Write single-channel images quantized to bytes, plus labels."""
    if dataset.images.shape[1] != 1:
        raise ValueError("IDX stores single-channel images only")
    pix = np.clip(np.rint(dataset.images[:, 0] * 255.0), 0, 255).astype(np.uint8)
    write_idx(images_path, pix)
    write_idx(labels_path, dataset.labels.astype(np.uint8))
