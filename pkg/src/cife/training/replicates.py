"""Seeded replicate runs aggregated as mean ± population std."""
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Sequence

import numpy as np

from cife.core.types import ReplicateSummary, TrainConfig
from cife.data.dataset import DomainDataset
from cife.models.networks import ModelSpec, build_model
from cife.training.trainer import final_target_accuracy, train

logger = logging.getLogger(__name__)


def run_single(cfg: TrainConfig, ds: DomainDataset, model_spec: ModelSpec = ModelSpec()) -> float:
    """Build, train and evaluate one model; returns target-test accuracy."""
    model = build_model(cfg.variant, ds.input_dim, ds.num_classes, model_spec, seed=cfg.seed)
    model, _ = train(model, ds, cfg)
    accuracy = final_target_accuracy(model, ds, cfg)
    logger.info("%s seed=%d λ_c=%s: target accuracy %.4f", cfg.variant.value, cfg.seed, cfg.lambda_c, accuracy)
    return accuracy


def summarize(accuracies: Sequence[float], seeds: Sequence[int]) -> ReplicateSummary:
    """Mean and population standard deviation of replicate accuracies."""
    values = np.asarray(accuracies, dtype=np.float64)
    if values.size == 0:
        raise ValueError("need at least one replicate")
    return ReplicateSummary(
        mean=float(np.mean(values)),
        std=float(np.std(values)),
        accuracies=tuple(float(v) for v in values),
        seeds=tuple(seeds),
    )


def run_replicates(
    cfg: TrainConfig,
    ds: DomainDataset,
    n_runs: int = 3,
    model_spec: ModelSpec = ModelSpec(),
    workers: int = 1,
) -> ReplicateSummary:
    """
    Train and evaluate ``n_runs`` models with seeds seed, seed+1, ...

    Args:
        cfg: Base configuration; its seed is the first replicate's seed
        ds: Shared dataset
        n_runs: Number of replicates
        model_spec: Component widths
        workers: Worker processes; results are gathered in seed order, so
            the summary does not depend on scheduling

    Returns:
        ReplicateSummary over target-test accuracies
    """
    if n_runs < 1:
        raise ValueError(f"n_runs must be >= 1, got {n_runs}")
    configs = [cfg.with_seed(cfg.seed + i) for i in range(n_runs)]
    if workers > 1 and n_runs > 1:
        with ProcessPoolExecutor(max_workers=min(workers, n_runs)) as pool:
            accuracies = list(pool.map(run_single, configs, [ds] * n_runs, [model_spec] * n_runs))
    else:
        accuracies = [run_single(c, ds, model_spec) for c in configs]
    return summarize(accuracies, [c.seed for c in configs])
