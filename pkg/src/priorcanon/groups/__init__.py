"""Group elements, group actions and matrix Fisher numerics."""
from .cyclic import (
    CyclicElement, bilinear_operator, disk_mask, rotate_array, rotate_array_adjoint, rotate_image, rotate_image_angle,
)
from .fisher import (
    MatrixFisherParams, PriorDistribution, haar_angle_density, mf_cross_entropy, mf_log_normalizer,
    mf_log_normalizer_derivative, mf_logpdf, mf_mean_coefficient,
)
from .rotations import (
    ROTATION_TOL, axis_angle, check_rotation, gram_schmidt_rotation, is_rotation, proper_svd,
    rotate_points, rotation_2d, rotation_angle, sample_uniform_rotation,
)

__all__ = [
    "CyclicElement", "MatrixFisherParams", "PriorDistribution", "ROTATION_TOL", "axis_angle",
    "bilinear_operator", "check_rotation", "disk_mask", "gram_schmidt_rotation",
    "haar_angle_density", "is_rotation", "mf_cross_entropy", "mf_log_normalizer",
    "mf_log_normalizer_derivative", "mf_logpdf", "mf_mean_coefficient", "proper_svd",
    "rotate_array", "rotate_array_adjoint", "rotate_image", "rotate_image_angle", "rotate_points", "rotation_2d",
    "rotation_angle", "sample_uniform_rotation",
]
