"""λ_c sensitivity sweep."""
import logging
from pathlib import Path
from typing import List, Sequence, Union

import pandas as pd

from cife.core.types import LAMBDA_C_GRID, SweepRow, TrainConfig
from cife.data.dataset import DomainDataset
from cife.models.networks import ModelSpec
from cife.training.replicates import run_replicates

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["lambda_c", "mean_acc", "std_acc"]


def lambda_c_sweep(
    ds: DomainDataset,
    base: TrainConfig,
    grid: Sequence[float] = LAMBDA_C_GRID,
    n_runs: int = 3,
    model_spec: ModelSpec = ModelSpec(),
    workers: int = 1,
) -> List[SweepRow]:
    """
    Replicate runs for each λ_c in ``grid``, sharing the base seeds.

    Returns:
        One SweepRow per grid value, sorted ascending by λ_c
    """
    if len(grid) == 0:
        raise ValueError("sweep grid must not be empty")
    rows = []
    for lambda_c in sorted(grid):
        summary = run_replicates(base.with_lambda_c(lambda_c), ds, n_runs, model_spec, workers)
        logger.info("λ_c=%s: %s", lambda_c, summary.summary())
        rows.append(SweepRow(lambda_c=float(lambda_c), mean_acc=summary.mean, std_acc=summary.std))
    return rows


def sweep_frame(rows: Sequence[SweepRow]) -> pd.DataFrame:
    return pd.DataFrame(
        [[row.lambda_c, row.mean_acc, row.std_acc] for row in rows], columns=SWEEP_COLUMNS
    )


def write_sweep_csv(rows: Sequence[SweepRow], path: Union[str, Path]) -> Path:
    """Comma-separated table with header lambda_c,mean_acc,std_acc."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sweep_frame(rows).to_csv(path, index=False)
    return path


def read_sweep_csv(path: Union[str, Path]) -> List[SweepRow]:
    frame = pd.read_csv(path, float_precision="round_trip")
    if list(frame.columns) != SWEEP_COLUMNS:
        raise ValueError(f"{path}: expected columns {SWEEP_COLUMNS}, got {list(frame.columns)}")
    return [SweepRow(float(r.lambda_c), float(r.mean_acc), float(r.std_acc)) for r in frame.itertuples()]
