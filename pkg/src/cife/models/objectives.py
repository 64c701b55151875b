"""
Loss terms and the dual adversarial objective.

Sign convention: both discriminators descend their own cross-entropy
loss. The extractors play against them through gradient reversal
(single-pass mode) or through an explicitly negated objective (two-phase
mode), so every optimizer step is a descent step.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from cife.autodiff import ops
from cife.autodiff.losses import binary_cross_entropy, softmax_cross_entropy
from cife.autodiff.tensor import Tensor, no_grad
from cife.core.errors import DomainError, ShapeError
from cife.models.networks import AdaptationModel, as_tensor

logger = logging.getLogger(__name__)

# Domain indices used as discriminator targets
SOURCE_DOMAIN = 0.0
TARGET_DOMAIN = 1.0


class Coupling(Enum):
    """How extractor features are handed to a discriminator."""
    REVERSED = "reversed"  # grad_reverse between extractor and discriminator
    PLAIN = "plain"  # ordinary gradient flow
    DETACHED = "detached"  # no gradient reaches the extractor


@dataclass
class LossBundle:
    """
    Scalar loss values of one objective evaluation.

    ``total`` is always l_c + λ_d·l_d + λ_c·l_dc. ``objective`` is the
    recorded tensor to differentiate; which terms it holds and with what
    weight depends on the objective that built it.
    """
    l_c: float
    l_d: float
    l_dc: float
    lambda_d: float
    lambda_c: float
    total: float = field(init=False)
    objective: Optional[Tensor] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.total = self.l_c + self.lambda_d * self.l_d + self.lambda_c * self.l_dc

    def terms(self):
        """(name, value) pairs checked for divergence by the trainer."""
        return (("l_c", self.l_c), ("l_d", self.l_d), ("l_dc", self.l_dc))


def _require_rows(op: str, x: Tensor):
    if x.data.ndim != 2 or x.shape[0] < 1:
        raise ShapeError(op, x.shape)


def _couple(features: Tensor, coupling: Coupling, coefficient: float) -> Tensor:
    if coupling is Coupling.REVERSED:
        return ops.grad_reverse(features, coefficient)
    if coupling is Coupling.DETACHED:
        return features.detach()
    return features


def cdan_condition(features: Tensor, predictions) -> Tensor:
    """
    Multilinear conditioning of features on class predictions.

    Args:
        features: n×m features
        predictions: n×K softmax probabilities (Tensor or array)

    Returns:
        n×(m·K) tensor whose row i is features_i ⊗ predictions_i

    Raises:
        DomainError: If a prediction row does not sum to 1 within 1e-6
    """
    predictions = as_tensor(predictions)
    row_sums = np.sum(predictions.data, axis=1)
    if np.any(np.abs(row_sums - 1.0) > 1e-6):
        raise DomainError(f"cdan_condition: prediction rows must sum to 1, got sums in "
                          f"[{row_sums.min()}, {row_sums.max()}]")
    return ops.outer_rows(features, predictions)


def _paired_specific(model: AdaptationModel, xs: Tensor, n: int) -> Tensor:
    """F_d of source rows, cycled to ``n`` rows, for target-side predictions."""
    rows = np.arange(n) % xs.shape[0]
    with no_grad():
        return model.specific_features(Tensor(xs.data[rows]))


def _detached_predictions(model: AdaptationModel, x: Tensor, specific: Optional[Tensor] = None) -> np.ndarray:
    with no_grad():
        logits = model.classifier(model.classifier_input(x, specific))
    return ops.stable_softmax(logits.data)


def _discriminator_input(model: AdaptationModel, features: Tensor, x: Tensor,
                         specific: Optional[Tensor] = None) -> Tensor:
    if not model.variant.conditioned:
        return features
    return cdan_condition(features, _detached_predictions(model, x, specific))


def loss_classification(model: AdaptationModel, xs, ys) -> Tensor:
    """
    Cross-entropy of C on labeled source rows.

    For CIFE models C sees [F_d(x), F_s(x)]; for the others C∘F.
    """
    xs = as_tensor(xs)
    _require_rows("loss_classification", xs)
    logits = model.classifier(model.classifier_input(xs))
    return softmax_cross_entropy(logits, ys)


def loss_domain(
    model: AdaptationModel,
    xs,
    xt,
    lambda_d: float,
    coupling: Coupling = Coupling.REVERSED,
) -> Tensor:
    """
    Binary cross-entropy of the domain discriminator.

    Source rows carry domain index 0 and target rows 1; the value is the
    mean of the per-domain losses. With the default coupling the
    discriminator sees grad_reverse(F_s(x), lambda_d), so descending the
    returned loss trains the discriminator to separate domains while the
    extractor receives -lambda_d times its gradient.

    Args:
        model: Model with a domain discriminator
        xs: Source rows
        xt: Target rows
        lambda_d: Reversal coefficient
        coupling: How features reach the discriminator

    Returns:
        Scalar tensor l_d

    Raises:
        ShapeError: On empty batches
        ValueError: If the model has no domain discriminator
    """
    xs, xt = as_tensor(xs), as_tensor(xt)
    _require_rows("loss_domain", xs)
    _require_rows("loss_domain", xt)
    disc = model.domain_discriminator
    if disc is None:
        raise ValueError(f"variant {model.variant.value} has no domain discriminator")

    fs = _couple(model.invariant_features(xs), coupling, lambda_d)
    ft = _couple(model.invariant_features(xt), coupling, lambda_d)
    target_specific = None
    if model.has_specific_features and model.variant.conditioned:
        target_specific = _paired_specific(model, xs, xt.shape[0])
    ps = disc(_discriminator_input(model, fs, xs))
    pt = disc(_discriminator_input(model, ft, xt, target_specific))
    source_loss = binary_cross_entropy(ps, np.full(xs.shape[0], SOURCE_DOMAIN))
    target_loss = binary_cross_entropy(pt, np.full(xt.shape[0], TARGET_DOMAIN))
    return ops.scale(ops.add(source_loss, target_loss), 0.5)


def loss_category(
    model: AdaptationModel,
    xs,
    ys,
    lambda_c: float,
    coupling: Coupling = Coupling.REVERSED,
) -> Tensor:
    """
    Cross-entropy of the category discriminator D_t on F_d of source rows.

    Only source rows carry labels, so only they enter this game. With the
    default coupling F_d receives -lambda_c times the gradient D_t sees,
    pushing F_d towards features that carry no class information.
    """
    xs = as_tensor(xs)
    _require_rows("loss_category", xs)
    disc = model.category_discriminator
    if disc is None:
        raise ValueError(f"variant {model.variant.value} has no category discriminator")
    features = _couple(model.specific_features(xs), coupling, lambda_c)
    return softmax_cross_entropy(disc(features), ys)


def _weighted(term: Tensor, weight: float) -> Tensor:
    return ops.scale(term, weight)


def _played(term: Optional[Tensor], objective: Optional[Tensor]) -> Optional[Tensor]:
    if term is None:
        return objective
    return term if objective is None else ops.add(objective, term)


def total_objective(
    model: AdaptationModel,
    xs,
    ys,
    xt,
    lambda_d: float,
    lambda_c: float,
    coupling: Coupling = Coupling.REVERSED,
) -> LossBundle:
    """
    l_c + λ_d·l_d + λ_c·l_dc for one source/target batch pair.

    The weights live in the reversal coefficients: each adversarial term
    enters the differentiated objective with unit weight behind
    grad_reverse(·, λ). One backward pass therefore hands F_s exactly
    ∂l_c - λ_d·∂l_d and F_d exactly ∂l_c - λ_c·∂l_dc, while each
    discriminator descends its own unweighted loss. A game whose weight
    is zero is not played, so its discriminator keeps its parameters.
    ``total`` still reports the weighted sum; terms a variant does not
    play are zero.

    Args:
        model: Model to evaluate
        xs: Source rows
        ys: Source labels
        xt: Target rows (label-free)
        lambda_d: Domain-alignment weight
        lambda_c: Category-alignment weight
        coupling: REVERSED for single-pass training, PLAIN for the
            unreversed reference graph

    Returns:
        LossBundle whose ``objective`` is ready for backward
    """
    if lambda_d < 0 or lambda_c < 0:
        raise ValueError(f"loss weights must be non-negative, got λ_d={lambda_d}, λ_c={lambda_c}")
    l_c = loss_classification(model, xs, ys)
    objective = l_c
    l_d_value = l_dc_value = 0.0
    if model.variant.aligns_domains:
        l_d = loss_domain(model, xs, xt, lambda_d, coupling)
        l_d_value = l_d.item()
        if lambda_d > 0:
            objective = ops.add(objective, l_d)
    if model.variant.aligns_categories:
        l_dc = loss_category(model, xs, ys, lambda_c, coupling)
        l_dc_value = l_dc.item()
        if lambda_c > 0:
            objective = ops.add(objective, l_dc)
    return LossBundle(
        l_c=l_c.item(), l_d=l_d_value, l_dc=l_dc_value,
        lambda_d=lambda_d, lambda_c=lambda_c, objective=objective,
    )


def discriminator_objective(model: AdaptationModel, xs, ys, xt, lambda_d: float, lambda_c: float) -> LossBundle:
    """
    Sum of the played discriminator losses on detached features: the
    discriminator phase of a two-phase iteration.

    Discriminators descend their unweighted losses, as in reversal mode;
    a game with zero weight is skipped. No gradient reaches the
    extractors or C. ``objective`` is None when no game is played.
    """
    xs = as_tensor(xs)
    objective = None
    l_d_value = l_dc_value = 0.0
    if model.variant.aligns_domains:
        l_d = loss_domain(model, xs, xt, 0.0, Coupling.DETACHED)
        l_d_value = l_d.item()
        objective = _played(l_d if lambda_d > 0 else None, objective)
    if model.variant.aligns_categories:
        l_dc = loss_category(model, xs, ys, 0.0, Coupling.DETACHED)
        l_dc_value = l_dc.item()
        objective = _played(l_dc if lambda_c > 0 else None, objective)
    with no_grad():
        l_c_value = loss_classification(model, xs, ys).item()
    return LossBundle(
        l_c=l_c_value, l_d=l_d_value, l_dc=l_dc_value,
        lambda_d=lambda_d, lambda_c=lambda_c, objective=objective,
    )


def extractor_objective(model: AdaptationModel, xs, ys, xt, lambda_d: float, lambda_c: float) -> LossBundle:
    """
    l_c - λ_d·l_d - λ_c·l_dc with plain coupling: the extractor and
    classifier phase of a two-phase iteration. Discriminator gradients
    produced by this objective must be discarded by the caller.
    """
    l_c = loss_classification(model, xs, ys)
    objective = l_c
    l_d_value = l_dc_value = 0.0
    if model.variant.aligns_domains:
        l_d = loss_domain(model, xs, xt, 0.0, Coupling.PLAIN)
        l_d_value = l_d.item()
        objective = ops.sub(objective, _weighted(l_d, lambda_d))
    if model.variant.aligns_categories:
        l_dc = loss_category(model, xs, ys, 0.0, Coupling.PLAIN)
        l_dc_value = l_dc.item()
        objective = ops.sub(objective, _weighted(l_dc, lambda_c))
    return LossBundle(
        l_c=l_c.item(), l_d=l_d_value, l_dc=l_dc_value,
        lambda_d=lambda_d, lambda_c=lambda_c, objective=objective,
    )


def forward_predict_concat(model: AdaptationModel, fd_source, xt) -> np.ndarray:
    """
    softmax(C([fd_source, F_s(xt)])) without recording.

    Args:
        model: CIFE model
        fd_source: n×m_d F_d features of source rows drawn for prediction
        xt: n×d target rows

    Returns:
        n×K class probabilities

    Raises:
        ShapeError: If row counts differ or widths do not match C
    """
    if not model.has_specific_features:
        raise ValueError(f"variant {model.variant.value} has no category-invariant features")
    fd_source, xt = as_tensor(fd_source), as_tensor(xt)
    if fd_source.data.ndim != 2 or xt.data.ndim != 2 or fd_source.shape[0] != xt.shape[0]:
        raise ShapeError("forward_predict_concat", fd_source.shape, xt.shape)
    with no_grad():
        logits = model.classifier(model.classifier_input(xt, fd_source))
    return ops.stable_softmax(logits.data)
