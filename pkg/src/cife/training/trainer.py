"""Adversarial training loop."""
import logging
import math
from typing import Callable, List, Optional, Tuple

import numpy as np

from cife.autodiff.tensor import Tape, backward
from cife.core.errors import TrainingDivergedError
from cife.core.types import EpochMetrics, TrainConfig, UpdateMode
from cife.data.dataset import DomainDataset, LabeledSplit, TrainingView
from cife.data.sampling import BatchPair, batch_iter, batches_per_epoch
from cife.models.networks import AdaptationModel
from cife.models.objectives import LossBundle, discriminator_objective, extractor_objective, total_objective
from cife.nn.optim import SgdMomentum
from cife.nn.schedules import lambda_d_schedule, lr_schedule, progress
from cife.training.prediction import evaluate_accuracy, predict_target

logger = logging.getLogger(__name__)

EpochCallback = Callable[[EpochMetrics], None]

# Stream tag separating prediction draws from batch sampling
_EVAL_STREAM = 1


def split_accuracy(model: AdaptationModel, source_pool: np.ndarray, split: LabeledSplit,
                   k_pred: int, seed) -> float:
    """Accuracy on a labeled split using the variant's prediction procedure."""
    predictions = predict_target(model, source_pool, split.features, k_pred, seed)
    return evaluate_accuracy(predictions, split.labels)


class Trainer:
    """
    Runs the minimax game for one model and one configuration.

    In reversal mode each iteration takes one descent step on l_c plus
    the played adversarial losses, with grad_reverse(·, λ) in front of
    each discriminator. In two-phase mode each iteration first steps the
    discriminators on detached features, then steps the extractors and
    classifier on l_c - λ_d·l_d - λ_c·l_dc. Either way a discriminator
    descends its own unweighted loss and is only stepped while its
    weight is positive. λ_d and the learning rate follow their schedules
    in the per-batch progress p; λ_c is constant.

    Example:
        >>> trainer = Trainer(model, TrainConfig(variant=Variant.CIFE_DANN, epochs=5))
        >>> metrics = trainer.fit(dataset)
    """

    def __init__(self, model: AdaptationModel, cfg: TrainConfig, on_epoch: Optional[EpochCallback] = None):
        if model.variant is not cfg.variant:
            raise ValueError(f"model variant {model.variant.value} does not match config {cfg.variant.value}")
        self.model = model
        self.cfg = cfg
        self.on_epoch = on_epoch
        lr = cfg.schedule.eta0
        self.extractor_opt = SgdMomentum(model.extractor_parameters(), lr=lr, momentum=cfg.momentum)
        self.domain_opt = self.category_opt = None
        if model.domain_discriminator is not None:
            self.domain_opt = SgdMomentum(model.domain_discriminator.parameters(), lr=lr, momentum=cfg.momentum)
        if model.category_discriminator is not None:
            self.category_opt = SgdMomentum(model.category_discriminator.parameters(), lr=lr, momentum=cfg.momentum)
        self.optimizers = [opt for opt in (self.extractor_opt, self.domain_opt, self.category_opt) if opt is not None]
        self.iteration = 0

    def fit(self, data: DomainDataset) -> List[EpochMetrics]:
        """
        Train for ``cfg.epochs`` epochs.

        Only ``data.training_view()`` reaches the optimization steps; the
        target-test split is used for the per-epoch accuracy record.
        """
        cfg = self.cfg
        if cfg.epochs == 0:
            return []
        view = data.training_view()
        total = cfg.epochs * batches_per_epoch(view, cfg.batch_size)
        history: List[EpochMetrics] = []
        for epoch in range(cfg.epochs):
            bundles = []
            lr = lambda_d = 0.0
            for batch in batch_iter(view, cfg.batch_size, cfg.seed, epoch):
                p = progress(self.iteration, total)
                lr = lr_schedule(p, cfg.schedule)
                lambda_d = lambda_d_schedule(p, cfg.schedule) if cfg.variant.aligns_domains else 0.0
                bundles.append(self.step(batch, lr, lambda_d))
                self.iteration += 1
            metrics = self._epoch_metrics(epoch, bundles, lr, lambda_d, view, data)
            logger.info(
                "epoch %d: l_c=%.4f l_d=%.4f l_dc=%.4f lr=%.5f λ_d=%.4f source=%.3f target=%.3f",
                metrics.epoch, metrics.l_c, metrics.l_d, metrics.l_dc, metrics.lr, metrics.lambda_d,
                metrics.source_accuracy, metrics.target_accuracy,
            )
            history.append(metrics)
            if self.on_epoch is not None:
                self.on_epoch(metrics)
        return history

    def step(self, batch: BatchPair, lr: float, lambda_d: float) -> LossBundle:
        """One iteration on a batch pair."""
        for opt in self.optimizers:
            opt.lr = lr
        lambda_c = self.cfg.lambda_c if self.cfg.variant.aligns_categories else 0.0
        if self.cfg.update_mode is UpdateMode.REVERSAL:
            bundle = self._reversal_step(batch, lambda_d, lambda_c)
        else:
            bundle = self._two_phase_step(batch, lambda_d, lambda_c)
        logger.debug(
            "iteration %d: total=%.6f lr=%.6f λ_d=%.4f", self.iteration, bundle.total, lr, lambda_d
        )
        return bundle

    def _reversal_step(self, batch: BatchPair, lambda_d: float, lambda_c: float) -> LossBundle:
        with Tape() as tape:
            bundle = total_objective(self.model, batch.xs, batch.ys, batch.xt, lambda_d, lambda_c)
        self._check_finite(bundle)
        backward(bundle.objective, tape)
        self.extractor_opt.step()
        self._step_discriminators(lambda_d, lambda_c)
        return bundle

    def _two_phase_step(self, batch: BatchPair, lambda_d: float, lambda_c: float) -> LossBundle:
        if self._played(lambda_d, lambda_c):
            with Tape() as tape:
                disc_bundle = discriminator_objective(self.model, batch.xs, batch.ys, batch.xt, lambda_d, lambda_c)
            self._check_finite(disc_bundle)
            backward(disc_bundle.objective, tape)
            self._step_discriminators(lambda_d, lambda_c)

        with Tape() as tape:
            bundle = extractor_objective(self.model, batch.xs, batch.ys, batch.xt, lambda_d, lambda_c)
        self._check_finite(bundle)
        backward(bundle.objective, tape)
        for opt in self.optimizers[1:]:
            opt.zero_grad()
        self.extractor_opt.step()
        return bundle

    def _played(self, lambda_d: float, lambda_c: float) -> List[SgdMomentum]:
        """Optimizers of the discriminators whose game has positive weight."""
        games = ((self.domain_opt, lambda_d), (self.category_opt, lambda_c))
        return [opt for opt, weight in games if opt is not None and weight > 0]

    def _step_discriminators(self, lambda_d: float, lambda_c: float):
        played = self._played(lambda_d, lambda_c)
        for opt in (self.domain_opt, self.category_opt):
            if opt is None:
                continue
            if opt in played:
                opt.step()
            else:
                opt.zero_grad()

    def _check_finite(self, bundle: LossBundle):
        for term, value in bundle.terms():
            if not math.isfinite(value):
                logger.error("Loss term %s is %s at iteration %d", term, value, self.iteration)
                raise TrainingDivergedError(term, self.iteration, value)

    def _epoch_metrics(self, epoch: int, bundles: List[LossBundle], lr: float, lambda_d: float,
                       view: TrainingView, data: DomainDataset) -> EpochMetrics:
        cfg = self.cfg
        pool = view.source.features
        seed = [cfg.seed, _EVAL_STREAM, epoch]
        return EpochMetrics(
            epoch=epoch,
            l_c=float(np.mean([b.l_c for b in bundles])),
            l_d=float(np.mean([b.l_d for b in bundles])),
            l_dc=float(np.mean([b.l_dc for b in bundles])),
            lr=lr,
            lambda_d=lambda_d,
            source_accuracy=split_accuracy(self.model, pool, view.source, cfg.prediction_draws, seed),
            target_accuracy=split_accuracy(self.model, pool, data.target_test, cfg.prediction_draws, seed),
        )


def train(
    model: AdaptationModel,
    ds: DomainDataset,
    cfg: TrainConfig,
    on_epoch: Optional[EpochCallback] = None,
) -> Tuple[AdaptationModel, List[EpochMetrics]]:
    """
    Train ``model`` in place on ``ds``.

    Args:
        model: Model built for ``cfg.variant``
        ds: Dataset; only its training view is optimized on
        cfg: Training configuration
        on_epoch: Called with each epoch's metrics as soon as they exist

    Returns:
        (model, per-epoch metrics); with epochs=0 the model is untouched
        and the metrics list is empty

    Raises:
        TrainingDivergedError: If a loss term becomes NaN or infinite
    """
    metrics = Trainer(model, cfg, on_epoch).fit(ds)
    return model, metrics


def final_eval_seed(cfg: TrainConfig) -> List[int]:
    """Prediction seed used for accuracies reported after training."""
    return [cfg.seed, _EVAL_STREAM, cfg.epochs]


def final_target_accuracy(model: AdaptationModel, ds: DomainDataset, cfg: TrainConfig) -> float:
    """Target-test accuracy with the run's own prediction seed."""
    return split_accuracy(model, ds.source.features, ds.target_test, cfg.prediction_draws, final_eval_seed(cfg))
