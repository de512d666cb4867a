"""Minimal reverse-mode autodiff: tensors, convolutions, Adam."""
from .conv import conv2d, conv_transpose2d, pad2d
from .optim import Adam, AdamState, adam_step
from .tensor import (
    NonFiniteError,
    Tape,
    Tensor,
    add,
    add_bias,
    arctan,
    as_tensor,
    clamp,
    concat,
    flip,
    is_grad_enabled,
    leaky_relu,
    log,
    matmul,
    mean,
    mul,
    neg,
    no_grad,
    pointwise,
    relu,
    reshape,
    sigmoid,
    sub,
    tabs,
    tanh,
    tsum,
)

__all__ = [
    "Adam", "AdamState", "NonFiniteError", "Tape", "Tensor", "adam_step", "add", "add_bias",
    "arctan", "as_tensor", "clamp", "concat", "conv2d", "conv_transpose2d", "flip",
    "is_grad_enabled", "leaky_relu", "log", "matmul", "mean", "mul", "neg", "no_grad",
    "pad2d", "pointwise", "relu", "reshape", "sigmoid", "sub", "tabs", "tanh", "tsum",
]
