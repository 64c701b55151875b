"""Fresh probe networks trained on frozen features."""
import logging
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from cife.autodiff.losses import softmax_cross_entropy
from cife.autodiff.ops import stable_softmax
from cife.autodiff.tensor import Tape, Tensor, backward, no_grad
from cife.core.errors import ProbeError
from cife.core.types import FeatureKind, HeadKind, ScheduleParams
from cife.models.networks import AdaptationModel
from cife.nn.layers import Mlp, SeedLike
from cife.nn.optim import SgdMomentum
from cife.nn.schedules import lr_schedule, progress

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProbeSettings:
    """Capacity and optimization of every probe: one hidden layer of 64, 200 epochs."""
    hidden: int = 64
    epochs: int = 200
    batch_size: int = 64
    momentum: float = 0.9
    schedule: ScheduleParams = field(default_factory=ScheduleParams)

    def __post_init__(self):
        if self.hidden < 1 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError(f"probe widths and counts must be positive, got {self}")


@dataclass(frozen=True, eq=False)
class FittedProbe:
    """A trained probe plus the standardization fitted on its training rows."""
    network: Mlp
    mean: np.ndarray
    scale: np.ndarray

    def predict(self, features: np.ndarray) -> np.ndarray:
        x = (np.asarray(features, dtype=np.float64) - self.mean) / self.scale
        with no_grad():
            logits = self.network(Tensor(x))
        return np.argmax(stable_softmax(logits.data), axis=1)

    def error(self, features: np.ndarray, labels: np.ndarray) -> float:
        return float(np.mean(self.predict(features) != np.asarray(labels)))


def extract_features(model: AdaptationModel, x: np.ndarray, kind: FeatureKind) -> np.ndarray:
    """
    Frozen features of ``x`` without recording or touching parameters.

    INVARIANT is F_s (F for single-extractor variants), SPECIFIC is F_d
    and CLASSIFIER_INPUT is what C consumes ([F_d, F_s] for CIFE models).
    """
    tensor = Tensor(np.asarray(x, dtype=np.float64))
    with no_grad():
        if kind is FeatureKind.INVARIANT:
            out = model.invariant_features(tensor)
        elif kind is FeatureKind.SPECIFIC:
            out = model.specific_features(tensor)
            if out is None:
                raise ProbeError(f"variant {model.variant.value} has no category-invariant features")
        else:
            out = model.classifier_input(tensor)
    return out.data.copy()


def split_half(n: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Random disjoint train/test index halves of range(n)."""
    order = rng.permutation(n)
    cut = n // 2
    return order[:cut], order[cut:]


def fit_probe(
    features: np.ndarray,
    labels: np.ndarray,
    num_classes: int,
    seed: SeedLike,
    settings: ProbeSettings = ProbeSettings(),
) -> FittedProbe:
    """
    Train a fresh one-hidden-layer softmax probe.

    Features are standardized with statistics of the training rows.
    Optimization is mini-batch SGD with momentum under the same
    learning-rate schedule as model training; the final partial batch of
    each epoch is kept so tiny probe sets still train.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale < 1e-8] = 1.0
    x = (x - mean) / scale

    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    init_seq, order_seq = seq.spawn(2)
    network = Mlp.build([x.shape[1], settings.hidden, num_classes], HeadKind.SOFTMAX_LOGITS, init_seq)
    opt = SgdMomentum(network.parameters(), lr=settings.schedule.eta0, momentum=settings.momentum)
    rng = np.random.default_rng(order_seq)

    n = x.shape[0]
    per_epoch = -(-n // settings.batch_size)
    total = settings.epochs * per_epoch
    iteration = 0
    for _ in range(settings.epochs):
        order = rng.permutation(n)
        for start in range(0, n, settings.batch_size):
            idx = order[start:start + settings.batch_size]
            opt.lr = lr_schedule(progress(iteration, total), settings.schedule)
            with Tape() as tape:
                loss = softmax_cross_entropy(network(Tensor(x[idx])), y[idx])
            backward(loss, tape)
            opt.step()
            iteration += 1
    return FittedProbe(network=network, mean=mean, scale=scale)


def require_classes(labels: np.ndarray, what: str) -> int:
    """Number of classes, rejecting inputs with fewer than two."""
    labels = np.asarray(labels)
    present = np.unique(labels)
    if present.size < 2:
        raise ProbeError(f"{what} needs at least two classes, got {present.tolist()}")
    return int(present.max()) + 1

