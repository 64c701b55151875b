"""Cross-entropy losses over recorded tensors."""
import numpy as np

from cife.autodiff.tensor import Tensor, make_result
from cife.core.errors import DomainError, LabelError, ShapeError

# Probabilities are clamped into [PROB_EPS, 1 - PROB_EPS] before logs
PROB_EPS = 1e-12


def _as_labels(labels, n: int, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ShapeError("labels", labels.shape, (n,))
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise LabelError(f"labels must lie in [0, {num_classes}), got range [{labels.min()}, {labels.max()}]")
    return labels.astype(np.int64)


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """
    Mean negative log-likelihood of ``labels`` under softmax(``logits``).

    Computed through a max-shifted log-softmax so the value is finite for
    any finite logits.

    Args:
        logits: n×K tensor
        labels: n class indices in [0, K)

    Returns:
        Scalar tensor

    Raises:
        LabelError: If a label is outside [0, K)
    """
    if logits.data.ndim != 2 or logits.shape[0] < 1:
        raise ShapeError("softmax_cross_entropy", logits.shape)
    n, num_classes = logits.shape
    y = _as_labels(labels, n, num_classes)

    shifted = logits.data - np.max(logits.data, axis=1, keepdims=True)
    log_norm = np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))
    log_probs = shifted - log_norm
    probs = np.exp(log_probs)
    rows = np.arange(n)
    value = -np.mean(log_probs[rows, y])

    def rule(g):
        grad = probs.copy()
        grad[rows, y] -= 1.0
        return (grad * (g / n),)

    return make_result("softmax_cross_entropy", value, (logits,), rule)


def binary_cross_entropy(p: Tensor, targets) -> Tensor:
    """
    Mean of -(t·log p + (1-t)·log(1-p)).

    ``p`` may be shaped n or n×1 (the output of a sigmoid head).
    Probabilities are clamped into [1e-12, 1 - 1e-12]; clamped entries
    pass no gradient.

    Raises:
        DomainError: If any probability is NaN or outside [0, 1]
    """
    probs = p.data.reshape(-1)
    n = probs.shape[0]
    if n < 1:
        raise ShapeError("binary_cross_entropy", p.shape)
    t = np.asarray(targets, dtype=np.float64).reshape(-1)
    if t.shape != (n,):
        raise ShapeError("binary_cross_entropy", p.shape, t.shape)
    if np.any((t != 0.0) & (t != 1.0)):
        raise LabelError("binary targets must be 0 or 1")
    if np.any(~((probs >= 0.0) & (probs <= 1.0))):
        raise DomainError("binary_cross_entropy: probabilities must lie in [0, 1]")

    clamped = np.clip(probs, PROB_EPS, 1.0 - PROB_EPS)
    inside = (probs >= PROB_EPS) & (probs <= 1.0 - PROB_EPS)
    value = -np.mean(t * np.log(clamped) + (1.0 - t) * np.log(1.0 - clamped))
    shape = p.shape

    def rule(g):
        grad = -(t / clamped - (1.0 - t) / (1.0 - clamped)) / n
        return ((grad * inside * g).reshape(shape),)

    return make_result("binary_cross_entropy", value, (p,), rule)
