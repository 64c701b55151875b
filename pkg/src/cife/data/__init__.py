"""Synthetic domain-shift datasets, sampling and serialization."""
from cife.data.dataset import DomainDataset, LabeledSplit, TrainingView, UnlabeledSplit
from cife.data.generators import (
    FactorizedTask,
    FactorizedTaskSpec,
    MoonsShiftSpec,
    build_factorized_task,
    gen_factorized,
    gen_moons_shift,
    latent_oracle_accuracy,
)
from cife.data.sampling import BatchPair, batch_iter, batches_per_epoch
from cife.data.io import load_dataset, save_dataset

__all__ = [
    "DomainDataset",
    "LabeledSplit",
    "TrainingView",
    "UnlabeledSplit",
    "FactorizedTask",
    "FactorizedTaskSpec",
    "MoonsShiftSpec",
    "build_factorized_task",
    "gen_factorized",
    "gen_moons_shift",
    "latent_oracle_accuracy",
    "BatchPair",
    "batch_iter",
    "batches_per_epoch",
    "load_dataset",
    "save_dataset",
]
