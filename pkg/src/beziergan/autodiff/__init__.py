"""Minimal reverse-mode automatic differentiation on numpy arrays."""
from .layers import BatchNorm, Conv1d, ConvTranspose1d, Dense, Module
from .optim import AdamState, adam_step
from .tensor import (
    ShapeError,
    Tensor,
    absolute,
    batch_norm,
    bernstein,
    clip,
    concat,
    conv1d,
    conv1d_transpose,
    cumsum,
    default_dtype,
    exp,
    l2norm,
    leaky_relu,
    log,
    matmul,
    precision,
    relu,
    set_default_dtype,
    sigmoid,
    softmax,
    softplus,
    sqrt,
    tanh,
    tmax,
)

__all__ = [
    "AdamState", "BatchNorm", "Conv1d", "ConvTranspose1d", "Dense", "Module", "ShapeError", "Tensor",
    "absolute", "adam_step", "batch_norm", "bernstein", "clip", "concat", "conv1d", "conv1d_transpose",
    "cumsum", "default_dtype", "exp", "l2norm", "leaky_relu", "log", "matmul", "precision", "relu",
    "set_default_dtype", "sigmoid", "softmax", "softplus", "sqrt", "tanh", "tmax",
]
