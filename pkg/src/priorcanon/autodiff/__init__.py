"""Minimal reverse-mode autodiff over float64 numpy arrays."""
from . import ops
from .gradcheck import gradcheck, numerical_grad, relative_error
from .ops import (
    avg_pool2, concat, conv2d, cross_entropy, cross_entropy_logits, elementwise, exp, getitem,
    log, log_softmax, matmul, mean, reduce, relu, reshape, softmax, softmax_logits, sqrt, stack,
    tanh, transpose,
)
from .optim import SGD, Adam, AdamState, adam_step, make_optimizer, sgd_step
from .tensor import Function, Tensor, as_tensor, no_grad, tape, tensor

__all__ = [
    "Adam", "AdamState", "Function", "SGD", "Tensor", "adam_step", "as_tensor", "avg_pool2",
    "concat", "conv2d", "cross_entropy", "cross_entropy_logits", "elementwise", "exp", "getitem",
    "gradcheck", "log", "log_softmax", "make_optimizer", "matmul", "mean", "no_grad",
    "numerical_grad", "ops", "reduce", "relative_error", "relu", "reshape", "sgd_step", "softmax",
    "softmax_logits", "sqrt", "stack", "tanh", "tape", "tensor", "transpose",
]
