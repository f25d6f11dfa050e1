"""Datasets, IDX files and checkpoints."""
from .checkpoint import (
    MAGIC, VERSION, Checkpoint, bundle_checkpoint, bundle_from_checkpoint, decode_checkpoint,
    encode_checkpoint, load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint,
)
from .datasets import (
    GLYPHS, N_PARTS, SHAPES, ImageDataset, PointDataset, datasets_for_config, generate_toy_images,
    generate_toy_pointclouds, glyph_prototypes, load_point_dataset, prototype_asymmetry, render_glyph,
    save_point_dataset,
)
from .idx import (
    IMAGES_MAGIC, LABELS_MAGIC, encode_idx, load_idx, read_idx_images, read_idx_labels, save_idx_dataset,
    write_idx,
)

__all__ = [
    "Checkpoint", "GLYPHS", "IMAGES_MAGIC", "ImageDataset", "LABELS_MAGIC", "MAGIC", "N_PARTS",
    "PointDataset", "SHAPES", "VERSION", "bundle_checkpoint", "bundle_from_checkpoint",
    "datasets_for_config", "decode_checkpoint", "encode_checkpoint", "encode_idx",
    "generate_toy_images", "generate_toy_pointclouds", "glyph_prototypes", "load_checkpoint", "load_idx",
    "load_point_dataset", "prototype_asymmetry", "read_checkpoint", "read_idx_images", "read_idx_labels",
    "render_glyph", "save_checkpoint", "save_idx_dataset", "save_point_dataset", "write_checkpoint",
    "write_idx",
]
