"""Central finite-difference gradient checking."""
from typing import Callable, Dict, Sequence

import numpy as np

from cife.autodiff.tensor import Tape, Tensor, backward


def numeric_gradient(loss_fn: Callable[[], Tensor], tensor: Tensor, step: float = 1e-5) -> np.ndarray:
    """
    Central-difference estimate of d loss / d tensor.

    ``loss_fn`` must rebuild the computation from the current values of
    ``tensor.data`` each time it is called.
    """
    grad = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + step
        upper = loss_fn().item()
        flat[i] = original - step
        lower = loss_fn().item()
        flat[i] = original
        out[i] = (upper - lower) / (2.0 * step)
    return grad


def analytic_gradients(loss_fn: Callable[[], Tensor], tensors: Sequence[Tensor]) -> Dict[int, np.ndarray]:
    """Gradients from one recorded backward pass, keyed by position."""
    for t in tensors:
        t.zero_grad()
    with Tape() as tape:
        loss = loss_fn()
    backward(loss, tape)
    grads = {}
    for i, t in enumerate(tensors):
        grads[i] = t.grad if t.grad is not None else np.zeros_like(t.data)
        t.zero_grad()
    return grads


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-10) -> float:
    """||a - b|| / max(||a|| + ||b||, floor)."""
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), floor))


def max_gradient_error(
    loss_fn: Callable[[], Tensor],
    tensors: Sequence[Tensor],
    step: float = 1e-5,
) -> float:
    """
    Worst relative error between analytic and finite-difference gradients.

    Args:
        loss_fn: Zero-argument function building a scalar loss
        tensors: Leaf tensors (``requires_grad=True``) to check
        step: Finite-difference step

    Returns:
        Largest relative error over ``tensors``
    """
    analytic = analytic_gradients(loss_fn, tensors)
    worst = 0.0
    for i, t in enumerate(tensors):
        numeric = numeric_gradient(loss_fn, t, step=step)
        worst = max(worst, relative_error(analytic[i], numeric))
    return worst
