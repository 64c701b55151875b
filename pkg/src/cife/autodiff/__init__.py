"""Reverse-mode automatic differentiation on float64 tensors."""
from cife.autodiff.tensor import Tape, Tensor, active_tape, backward, no_grad
from cife.autodiff.ops import (
    ElementwiseKind,
    add,
    concat,
    div,
    elementwise,
    exp,
    grad_reverse,
    log,
    matmul,
    mean,
    mul,
    neg,
    outer_rows,
    relu,
    scale,
    sigmoid,
    slice_columns,
    softmax,
    stable_softmax,
    sub,
    tanh,
)
from cife.autodiff.losses import PROB_EPS, binary_cross_entropy, softmax_cross_entropy

__all__ = [
    "Tape",
    "Tensor",
    "active_tape",
    "backward",
    "no_grad",
    "ElementwiseKind",
    "add",
    "concat",
    "div",
    "elementwise",
    "exp",
    "grad_reverse",
    "log",
    "matmul",
    "mean",
    "mul",
    "neg",
    "outer_rows",
    "relu",
    "scale",
    "sigmoid",
    "slice_columns",
    "softmax",
    "stable_softmax",
    "sub",
    "tanh",
    "PROB_EPS",
    "binary_cross_entropy",
    "softmax_cross_entropy",
]
