"""Mini-batch sampling over a training view."""
from dataclasses import dataclass
from typing import Iterator, Union

import numpy as np

from cife.data.dataset import DomainDataset, TrainingView


@dataclass(frozen=True, eq=False)
class BatchPair:
    """One iteration's source batch (with labels) and target batch (without)."""
    xs: np.ndarray
    ys: np.ndarray
    xt: np.ndarray


def batches_per_epoch(view: TrainingView, batch_size: int) -> int:
    return min(len(view.source), len(view.target)) // batch_size


def batch_iter(
    data: Union[TrainingView, DomainDataset],
    batch_size: int,
    seed: int,
    epoch: int,
) -> Iterator[BatchPair]:
    """
    Yield floor(min(n_s, n_t) / N) batch pairs for one epoch.

    Source and target rows are each permuted by a generator seeded with
    (seed, epoch) and consumed without replacement; the remainder that
    does not fill a batch is dropped.

    Args:
        data: Training view, or a dataset whose training view is used
        batch_size: Rows per batch N
        seed: Run seed
        epoch: Epoch index

    Raises:
        ValueError: If N exceeds min(n_s, n_t) or is not positive
    """
    view = data.training_view() if isinstance(data, DomainDataset) else data
    n_s, n_t = len(view.source), len(view.target)
    if batch_size < 1 or batch_size > min(n_s, n_t):
        raise ValueError(f"batch size {batch_size} must lie in [1, min(n_s, n_t)] = [1, {min(n_s, n_t)}]")

    rng = np.random.default_rng([seed, epoch])
    source_order = rng.permutation(n_s)
    target_order = rng.permutation(n_t)
    for b in range(batches_per_epoch(view, batch_size)):
        s_idx = source_order[b * batch_size:(b + 1) * batch_size]
        t_idx = target_order[b * batch_size:(b + 1) * batch_size]
        yield BatchPair(
            xs=view.source.features[s_idx],
            ys=view.source.labels[s_idx],
            xt=view.target.features[t_idx],
        )
