"""Prediction networks, training loops and evaluation statistics."""
from .augment import augment_batch, augmentation_schedule, sample_angle, sample_rotation_3d
from .evaluate import EvalReport, canonical_elements, evaluate, predict_logits
from .models import (
    ImageClassifier, ModelBundle, PointClassifier, PointSegmenter, build_bundle, build_image_classifier,
    build_point_classifier, identity_canonicalizer,
)
from .train import TrainResult, train

__all__ = [
    "EvalReport", "ImageClassifier", "ModelBundle", "PointClassifier", "PointSegmenter", "TrainResult",
    "augment_batch", "augmentation_schedule", "build_bundle", "build_image_classifier",
    "build_point_classifier", "canonical_elements", "evaluate", "identity_canonicalizer",
    "predict_logits", "sample_angle", "sample_rotation_3d", "train",
]
