"""Target prediction and accuracy evaluation."""
from typing import Sequence, Union

import numpy as np

from cife.autodiff import ops
from cife.autodiff.tensor import Tensor, no_grad
from cife.core.errors import DomainError, ShapeError
from cife.models.networks import AdaptationModel
from cife.models.objectives import forward_predict_concat

SeedLike = Union[int, Sequence[int]]


def _draw_indices(n: int, pool_size: int, k_pred: int, rng: np.random.Generator) -> np.ndarray:
    """n×k matrix of distinct pool indices per row."""
    if k_pred >= pool_size:
        return np.broadcast_to(np.arange(pool_size), (n, pool_size))
    return np.argsort(rng.random((n, pool_size)), axis=1)[:, :k_pred]


def predict_proba_target(
    model: AdaptationModel,
    source_pool: np.ndarray,
    xt: np.ndarray,
    k_pred: int = 8,
    seed: SeedLike = 0,
) -> np.ndarray:
    """
    Class probabilities for target rows.

    CIFE models need category-invariant features for every input, which
    target rows cannot supply from labels they do not have. For each
    target row we draw ``k_pred`` distinct source rows uniformly, pair
    their F_d features with F_s of the target row, and average the
    classifier's softmax over the draws. When ``k_pred`` covers the whole
    pool every pool row is used, giving the exact expectation. Other
    variants return softmax(C(F(xt))).

    Args:
        model: Trained model
        source_pool: Source rows to draw from (labels are not needed)
        xt: Target rows
        k_pred: Draws per target row
        seed: Seed of the draw generator

    Returns:
        n×K probabilities

    Raises:
        DomainError: If the pool is empty or k_pred < 1, for every variant
    """
    xt = np.asarray(xt, dtype=np.float64)
    source_pool = np.asarray(source_pool, dtype=np.float64)
    if source_pool.ndim != 2 or source_pool.shape[0] == 0:
        raise DomainError("prediction needs a non-empty source pool")
    if k_pred < 1:
        raise DomainError(f"k_pred must be >= 1, got {k_pred}")
    if not model.has_specific_features:
        with no_grad():
            logits = model.classifier(model.classifier_input(Tensor(xt)))
        return ops.stable_softmax(logits.data)

    with no_grad():
        pool_features = model.specific_features(Tensor(source_pool)).data
    indices = _draw_indices(xt.shape[0], source_pool.shape[0], k_pred, np.random.default_rng(seed))
    probs = np.zeros((xt.shape[0], model.num_classes))
    for j in range(indices.shape[1]):
        probs += forward_predict_concat(model, pool_features[indices[:, j]], xt)
    return probs / indices.shape[1]


def predict_target(
    model: AdaptationModel,
    source_pool: np.ndarray,
    xt: np.ndarray,
    k_pred: int = 8,
    seed: SeedLike = 0,
) -> np.ndarray:
    """Argmax of predict_proba_target; ties go to the lowest class index."""
    return np.argmax(predict_proba_target(model, source_pool, xt, k_pred, seed), axis=1)


def evaluate_accuracy(predictions, truth) -> float:
    """Fraction of positions where ``predictions`` equals ``truth``."""
    predictions, truth = np.asarray(predictions), np.asarray(truth)
    if predictions.shape != truth.shape:
        raise ShapeError("evaluate_accuracy", predictions.shape, truth.shape)
    if predictions.size == 0:
        raise ValueError("cannot evaluate accuracy of an empty prediction vector")
    return float(np.mean(predictions == truth))
