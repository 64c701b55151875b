"""Proxy A-distance between two feature sets."""
import logging
from typing import Tuple

import numpy as np

from cife.core.errors import ProbeError
from cife.probes.common import ProbeSettings, fit_probe, split_half

logger = logging.getLogger(__name__)

MIN_SAMPLES_PER_DOMAIN = 4


def a_distance(
    features_s: np.ndarray,
    features_t: np.ndarray,
    seed: int = 0,
    settings: ProbeSettings = ProbeSettings(),
) -> Tuple[float, float]:
    """
    Domain divergence d_A = 2(1 - 2ε) of frozen features.

    Each domain is split 50/50; a fresh two-class probe learns to tell the
    domains apart on the training halves and ε is its error on the
    held-out halves, folded to min(err, 1 - err) so that swapping the
    domain labels leaves it unchanged.

    Args:
        features_s: Source features, one row per example
        features_t: Target features, same width
        seed: Seed for the split and the probe
        settings: Probe capacity and schedule

    Returns:
        (epsilon, d_a) with epsilon in [0, 0.5] and d_a in [0, 2]

    Raises:
        ProbeError: If either domain has fewer than 4 rows
    """
    fs = np.asarray(features_s, dtype=np.float64)
    ft = np.asarray(features_t, dtype=np.float64)
    if min(fs.shape[0], ft.shape[0]) < MIN_SAMPLES_PER_DOMAIN:
        raise ProbeError(
            f"a_distance needs at least {MIN_SAMPLES_PER_DOMAIN} rows per domain, "
            f"got {fs.shape[0]} and {ft.shape[0]}"
        )
    if fs.shape[1] != ft.shape[1]:
        raise ProbeError(f"feature widths differ: {fs.shape[1]} vs {ft.shape[1]}")

    split_seq, probe_seq = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(split_seq)
    s_train, s_test = split_half(fs.shape[0], rng)
    t_train, t_test = split_half(ft.shape[0], rng)

    x_train = np.concatenate([fs[s_train], ft[t_train]])
    y_train = np.concatenate([np.zeros(len(s_train), dtype=np.int64), np.ones(len(t_train), dtype=np.int64)])
    x_test = np.concatenate([fs[s_test], ft[t_test]])
    y_test = np.concatenate([np.zeros(len(s_test), dtype=np.int64), np.ones(len(t_test), dtype=np.int64)])

    probe = fit_probe(x_train, y_train, 2, probe_seq, settings)
    error = probe.error(x_test, y_test)
    epsilon = float(min(max(min(error, 1.0 - error), 0.0), 0.5))
    d_a = 2.0 * (1.0 - 2.0 * epsilon)
    logger.info("A-distance: ε=%.4f d_A=%.4f", epsilon, d_a)
    return epsilon, d_a
