"""Learned canonicalization with prior regularization.

Subpackages:

- ``autodiff``: float64 tensors with reverse-mode gradients.
- ``groups``: cyclic and rotation groups, their actions, matrix Fisher numerics.
- ``nets``: group-equivariant layers and the point-cloud vector head.
- ``canon``: canonicalization functions and prior losses.
- ``harness``: prediction networks, training and evaluation.
- ``io``: toy datasets, IDX files, checkpoints.
"""
from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"
__all__ = ["KERNEL_BACKEND", "__version__"]
