"""Differentiable tensor operations."""
from enum import Enum
from typing import Optional

import numpy as np

from cife.autodiff.tensor import Tensor, make_result
from cife.core.errors import DomainError, ShapeError


class ElementwiseKind(Enum):
    """Elementwise operations; add, sub, mul and div are binary."""
    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    DIV = "div"
    RELU = "relu"
    EXP = "exp"
    LOG = "log"
    NEG = "neg"
    SIGMOID = "sigmoid"
    TANH = "tanh"

    @property
    def is_binary(self) -> bool:
        return self in (ElementwiseKind.ADD, ElementwiseKind.SUB, ElementwiseKind.MUL, ElementwiseKind.DIV)


def _broadcast_mode(op: str, a: Tensor, b: Tensor) -> bool:
    """
    Validate binary operand shapes.

    Returns True when ``b`` is a bias vector broadcast over the batch
    dimension of ``a``; this is the only broadcast supported.
    """
    if a.shape == b.shape:
        return False
    if a.data.ndim == 2 and b.data.ndim == 1 and a.shape[1] == b.shape[0]:
        return True
    raise ShapeError(op, a.shape, b.shape)


def _reduce_to(grad: np.ndarray, broadcast: bool) -> np.ndarray:
    return grad.sum(axis=0) if broadcast else grad


def elementwise(kind, a: Tensor, b: Optional[Tensor] = None) -> Tensor:
    """
    Apply an elementwise operation.

    Args:
        kind: ElementwiseKind or its string value
        a: First operand
        b: Second operand for binary kinds; same shape as ``a`` or a
           vector broadcast across the rows of a 2-D ``a``

    Returns:
        Result tensor, recorded on the active tape

    Raises:
        ShapeError: If binary operand shapes are incompatible
        DomainError: For log of non-positive values, division by zero or a
            wrong operand count
    """
    kind = ElementwiseKind(kind)
    if kind.is_binary:
        if b is None:
            raise DomainError(f"{kind.value} needs two operands")
        return _BINARY[kind](a, b)
    if b is not None:
        raise DomainError(f"{kind.value} takes a single operand")
    return _UNARY[kind](a)


def add(a: Tensor, b: Tensor) -> Tensor:
    broadcast = _broadcast_mode("add", a, b)

    def rule(g):
        return g, _reduce_to(g, broadcast)

    return make_result("add", a.data + b.data, (a, b), rule)


def sub(a: Tensor, b: Tensor) -> Tensor:
    broadcast = _broadcast_mode("sub", a, b)

    def rule(g):
        return g, -_reduce_to(g, broadcast)

    return make_result("sub", a.data - b.data, (a, b), rule)


def mul(a: Tensor, b: Tensor) -> Tensor:
    broadcast = _broadcast_mode("mul", a, b)
    a_val, b_val = a.data, b.data

    def rule(g):
        return g * b_val, _reduce_to(g * a_val, broadcast)

    return make_result("mul", a_val * b_val, (a, b), rule)


def div(a: Tensor, b: Tensor) -> Tensor:
    broadcast = _broadcast_mode("div", a, b)
    a_val, b_val = a.data, b.data
    if np.any(b_val == 0.0):
        raise DomainError("div: division by zero")

    def rule(g):
        return g / b_val, _reduce_to(-g * a_val / (b_val * b_val), broadcast)

    return make_result("div", a_val / b_val, (a, b), rule)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0.0

    def rule(g):
        return (g * mask,)

    return make_result("relu", np.where(mask, x.data, 0.0), (x,), rule)


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)

    def rule(g):
        return (g * out,)

    return make_result("exp", out, (x,), rule)


def log(x: Tensor) -> Tensor:
    if np.any(~(x.data > 0.0)):
        raise DomainError("log: input must be strictly positive")
    x_val = x.data

    def rule(g):
        return (g / x_val,)

    return make_result("log", np.log(x_val), (x,), rule)


def neg(x: Tensor) -> Tensor:
    def rule(g):
        return (-g,)

    return make_result("neg", -x.data, (x,), rule)


def sigmoid(x: Tensor) -> Tensor:
    # tanh form stays finite for large |x|
    out = 0.5 * (1.0 + np.tanh(0.5 * x.data))

    def rule(g):
        return (g * out * (1.0 - out),)

    return make_result("sigmoid", out, (x,), rule)


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def rule(g):
        return (g * (1.0 - out * out),)

    return make_result("tanh", out, (x,), rule)


_BINARY = {
    ElementwiseKind.ADD: add,
    ElementwiseKind.SUB: sub,
    ElementwiseKind.MUL: mul,
    ElementwiseKind.DIV: div,
}

_UNARY = {
    ElementwiseKind.RELU: relu,
    ElementwiseKind.EXP: exp,
    ElementwiseKind.LOG: log,
    ElementwiseKind.NEG: neg,
    ElementwiseKind.SIGMOID: sigmoid,
    ElementwiseKind.TANH: tanh,
}


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    Matrix product of an n×k and a k×m tensor.

    Backward: dL/da = g·bᵀ, dL/db = aᵀ·g.
    """
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    a_val, b_val = a.data, b.data

    def rule(g):
        return g @ b_val.T, a_val.T @ g

    return make_result("matmul", a_val @ b_val, (a, b), rule)


def scale(x: Tensor, coefficient: float) -> Tensor:
    """Multiply by a constant."""
    c = float(coefficient)

    def rule(g):
        return (g * c,)

    return make_result("scale", x.data * c, (x,), rule)


def sum(x: Tensor) -> Tensor:  # noqa: A001 - mirrors numpy naming
    """Sum of all entries as a scalar."""
    shape = x.shape

    def rule(g):
        return (np.broadcast_to(g, shape).copy(),)

    return make_result("sum", np.sum(x.data), (x,), rule)


def mean(x: Tensor) -> Tensor:
    """Mean of all entries as a scalar."""
    shape = x.shape
    n = x.size

    def rule(g):
        return (np.broadcast_to(g / n, shape).copy(),)

    return make_result("mean", np.mean(x.data), (x,), rule)


def concat(a: Tensor, b: Tensor) -> Tensor:
    """
    Column-wise concatenation of n×p and n×q tensors into n×(p+q).

    Backward splits the incoming gradient at column p.
    """
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[0] != b.shape[0]:
        raise ShapeError("concat", a.shape, b.shape)
    split = a.shape[1]

    def rule(g):
        return g[:, :split], g[:, split:]

    return make_result("concat", np.concatenate([a.data, b.data], axis=1), (a, b), rule)


def slice_columns(x: Tensor, start: int, stop: int) -> Tensor:
    """Columns [start, stop) of a 2-D tensor."""
    if x.data.ndim != 2 or not 0 <= start <= stop <= x.shape[1]:
        raise ShapeError("slice_columns", x.shape)
    shape = x.shape

    def rule(g):
        full = np.zeros(shape)
        full[:, start:stop] = g
        return (full,)

    return make_result("slice_columns", x.data[:, start:stop], (x,), rule)


def softmax(x: Tensor) -> Tensor:
    """Row-wise softmax of a 2-D tensor, stabilized by max subtraction."""
    if x.data.ndim != 2:
        raise ShapeError("softmax", x.shape)
    out = stable_softmax(x.data)

    def rule(g):
        return (out * (g - np.sum(g * out, axis=1, keepdims=True)),)

    return make_result("softmax", out, (x,), rule)


def stable_softmax(values: np.ndarray) -> np.ndarray:
    shifted = values - np.max(values, axis=1, keepdims=True)
    exps = np.exp(shifted)
    return exps / np.sum(exps, axis=1, keepdims=True)


def outer_rows(a: Tensor, b: Tensor) -> Tensor:
    """
    Row-wise flattened outer product.

    Row i of the n×(m·K) result is a_i ⊗ b_i, laid out so entry
    (j·K + k) equals a_ij · b_ik.
    """
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[0] != b.shape[0]:
        raise ShapeError("outer_rows", a.shape, b.shape)
    n, m = a.shape
    k = b.shape[1]
    a_val, b_val = a.data, b.data
    out = np.einsum("ni,nj->nij", a_val, b_val).reshape(n, m * k)

    def rule(g):
        g3 = g.reshape(n, m, k)
        return np.einsum("nij,nj->ni", g3, b_val), np.einsum("nij,ni->nj", g3, a_val)

    return make_result("outer_rows", out, (a, b), rule)


def grad_reverse(x: Tensor, coefficient: float = 1.0) -> Tensor:
    """
    Gradient reversal.

    Identity in the forward pass; the backward pass hands
    -coefficient × upstream to ``x``. Placing it between a feature
    extractor and a discriminator lets one descent step train the
    discriminator to separate and the extractor to confuse.

    Args:
        x: Input features
        coefficient: Non-negative reversal strength (λ)

    Returns:
        Tensor bitwise equal to ``x``

    Raises:
        DomainError: If the coefficient is negative
    """
    c = float(coefficient)
    if c < 0.0:
        raise DomainError(f"grad_reverse coefficient must be non-negative, got {c}")

    def rule(g):
        return (-c * g,)

    return make_result("grad_reverse", x.data.copy(), (x,), rule)
