"""Mini-batch SGD with momentum."""
from typing import List, Optional, Sequence

import numpy as np

from cife.autodiff.tensor import Tensor
from cife.core.errors import MissingGradientError


class SgdMomentum:
    """
    SGD with heavy-ball momentum.

    Update rule per parameter: v ← momentum·v + g; param ← param − lr·v.

    Example:
        >>> opt = SgdMomentum(model.parameters(), lr=0.01, momentum=0.9)
        >>> backward(loss, tape)
        >>> opt.step()
    """

    def __init__(self, params: Sequence[Tensor], lr: float = 0.01, momentum: float = 0.9):
        self.params: List[Tensor] = list(params)
        if not 0.0 <= momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {momentum}")
        self.momentum = momentum
        self.velocity: List[np.ndarray] = [np.zeros_like(p.data) for p in self.params]
        self._lr = 0.0
        self.lr = lr

    @property
    def lr(self) -> float:
        return self._lr

    @lr.setter
    def lr(self, value: float):
        if not value > 0.0:
            raise ValueError(f"learning rate must be positive, got {value}")
        self._lr = float(value)

    def step(self):
        """Apply one update using each parameter's ``grad``, then clear them."""
        sgd_step(self.params, [p.grad for p in self.params], self)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()


def sgd_step(params: Sequence[Tensor], grads: Sequence[Optional[np.ndarray]], opt: SgdMomentum) -> None:
    """
    Momentum update of ``params`` in place.

    Args:
        params: Parameters owned by ``opt`` (same order as its velocity buffers)
        grads: One gradient per parameter
        opt: Optimizer holding momentum, velocity and learning rate

    Raises:
        MissingGradientError: If any gradient is absent
    """
    if len(params) != len(opt.velocity) or len(grads) != len(params):
        raise ValueError("params, grads and optimizer state must have equal length")
    for i, (param, grad) in enumerate(zip(params, grads)):
        if grad is None:
            label = param.name or f"#{i}"
            raise MissingGradientError(f"parameter {label} has no gradient")
    for param, grad, velocity in zip(params, grads, opt.velocity):
        velocity *= opt.momentum
        velocity += grad
        param.data -= opt.lr * velocity
    for param in params:
        param.zero_grad()
