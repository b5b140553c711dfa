"""Minimal reverse-mode automatic differentiation over dense numpy tensors.

Define-by-run: each op records a backward closure when any input requires
gradients; backward() walks the tape in reverse topological order and frees
it. Exactly the layer set the models here need, plus SGD/Adam and a binary
checkpoint format.
"""

from .tensor import Tensor, tensor, no_grad, set_debug_checks, make_op_output, accumulate_grad
from .ops import (
    add,
    add_scalar,
    sub,
    mul,
    scale,
    matmul,
    mean,
    total,
    reshape,
    crop2d,
    transpose,
    tanh,
    relu,
    sigmoid,
    log1p,
    softmax,
    mse,
    l1,
    linear,
    conv2d,
    conv_transpose2d,
    batch_norm,
    self_attention_pool,
)
from .params import ParameterSet
from .optim import OptimizerConfig, Sgd, Adam, make_optimizer
from .checkpoint import save_checkpoint, load_checkpoint, file_sha256, CHECKPOINT_MAGIC
from .gradcheck import numeric_gradient, max_relative_error, run_op_suite, OpCheck

__all__ = [
    "Tensor",
    "tensor",
    "no_grad",
    "set_debug_checks",
    "make_op_output",
    "accumulate_grad",
    "add",
    "add_scalar",
    "sub",
    "mul",
    "scale",
    "matmul",
    "mean",
    "total",
    "reshape",
    "crop2d",
    "transpose",
    "tanh",
    "relu",
    "sigmoid",
    "log1p",
    "softmax",
    "mse",
    "l1",
    "linear",
    "conv2d",
    "conv_transpose2d",
    "batch_norm",
    "self_attention_pool",
    "ParameterSet",
    "OptimizerConfig",
    "Sgd",
    "Adam",
    "make_optimizer",
    "save_checkpoint",
    "load_checkpoint",
    "file_sha256",
    "CHECKPOINT_MAGIC",
    "numeric_gradient",
    "max_relative_error",
    "run_op_suite",
    "OpCheck",
]
