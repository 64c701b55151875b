"""Retrained probes measuring what frozen features encode."""
import logging

import numpy as np

from cife.core.errors import ProbeError
from cife.probes.common import ProbeSettings, fit_probe, require_classes, split_half

logger = logging.getLogger(__name__)


def feature_probe(
    features: np.ndarray,
    labels: np.ndarray,
    seed: int = 0,
    settings: ProbeSettings = ProbeSettings(),
) -> float:
    """
    Held-out accuracy of a fresh probe predicting ``labels`` from ``features``.

    ``labels`` may be class labels or domain indices. Rows are split
    50/50 into train and test.

    Raises:
        ProbeError: If fewer than two distinct labels are present
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.shape[0] != y.shape[0]:
        raise ProbeError(f"{x.shape[0]} feature rows but {y.shape[0]} labels")
    num_classes = require_classes(y, "feature_probe")

    split_seq, probe_seq = np.random.SeedSequence(seed).spawn(2)
    train_idx, test_idx = split_half(x.shape[0], np.random.default_rng(split_seq))
    if len(train_idx) == 0:
        raise ProbeError("feature_probe needs at least two rows")
    probe = fit_probe(x[train_idx], y[train_idx], num_classes, probe_seq, settings)
    accuracy = 1.0 - probe.error(x[test_idx], y[test_idx])
    logger.info("Feature probe accuracy %.4f (chance %.4f)", accuracy, 1.0 / num_classes)
    return accuracy
