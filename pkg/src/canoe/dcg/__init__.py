"""Differentiable computation graph core: tensors, ops, optimizer, gradcheck."""

from .tensor import (
    Tensor, NumericFault, no_grad, grad_enabled, set_debug_checks,
    constant, parameter, backward,
    add, sub, mul, div, neg, matmul,
    relu, exp, log, sqrt, clamp,
    tensor_sum, tensor_mean, softmax, log_softmax,
    concat, slice_axis, reshape, transpose, broadcast_to,
    gather_rows, take_along_last,
)
from .registry import ParamRegistry
from .optim import AdamW
from .gradcheck import grad_check

__all__ = [
    "Tensor", "NumericFault", "no_grad", "grad_enabled", "set_debug_checks",
    "constant", "parameter", "backward",
    "add", "sub", "mul", "div", "neg", "matmul",
    "relu", "exp", "log", "sqrt", "clamp",
    "tensor_sum", "tensor_mean", "softmax", "log_softmax",
    "concat", "slice_axis", "reshape", "transpose", "broadcast_to",
    "gather_rows", "take_along_last",
    "ParamRegistry", "AdamW", "grad_check",
]
