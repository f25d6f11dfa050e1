"""Network layers: plain, group-equivariant, and the point-cloud vector head."""
from .gconv import (
    EquivariantBatchNorm, FixedCanonicalizer, GConvLayer, GroupCanonicalizer, equivariant_norm,
    fiber_logits, group_conv, kernel_rotation_operators, lifting_conv, shift_fibers,
)
from .module import Conv2d, Linear, Module, he_normal
from .pointhead import (
    FixedPointCanonicalizer, PointCanonicalizer, invariant_point_features, vector_head_points,
)

__all__ = [
    "Conv2d", "EquivariantBatchNorm", "FixedCanonicalizer", "FixedPointCanonicalizer",
    "GConvLayer", "GroupCanonicalizer", "Linear", "Module", "PointCanonicalizer",
    "equivariant_norm", "fiber_logits", "group_conv", "he_normal", "invariant_point_features",
    "kernel_rotation_operators", "lifting_conv", "shift_fibers", "vector_head_points",
]
