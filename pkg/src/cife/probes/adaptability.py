"""Error of the ideal joint hypothesis over frozen features."""
import logging
from typing import Tuple

import numpy as np

from cife.core.errors import ProbeError
from cife.probes.common import ProbeSettings, fit_probe, split_half

logger = logging.getLogger(__name__)


def adaptability(
    features_s: np.ndarray,
    labels_s: np.ndarray,
    features_t: np.ndarray,
    labels_t: np.ndarray,
    num_classes: int,
    seed: int = 0,
    settings: ProbeSettings = ProbeSettings(),
) -> Tuple[float, float, float]:
    """
    Held-out errors of one probe trained on labeled rows of both domains.

    This is the only place target labels are read, and only for
    evaluation. Each domain is split 50/50; the probe trains on the union
    of the training halves.

    Returns:
        (err_s, err_t, err_s + err_t)

    Raises:
        ProbeError: If some class in [0, num_classes) is absent from the
            training union, or a held-out half is empty
    """
    fs, ft = np.asarray(features_s, dtype=np.float64), np.asarray(features_t, dtype=np.float64)
    ys, yt = np.asarray(labels_s, dtype=np.int64), np.asarray(labels_t, dtype=np.int64)
    if fs.shape[0] != ys.shape[0] or ft.shape[0] != yt.shape[0]:
        raise ProbeError("features and labels disagree on row counts")
    if fs.shape[1] != ft.shape[1]:
        raise ProbeError(f"feature widths differ: {fs.shape[1]} vs {ft.shape[1]}")

    split_seq, probe_seq = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(split_seq)
    s_train, s_test = split_half(fs.shape[0], rng)
    t_train, t_test = split_half(ft.shape[0], rng)
    if len(s_test) == 0 or len(t_test) == 0:
        raise ProbeError("adaptability needs at least one held-out row per domain")

    y_train = np.concatenate([ys[s_train], yt[t_train]])
    missing = sorted(set(range(num_classes)) - set(np.unique(y_train).tolist()))
    if missing:
        raise ProbeError(f"classes {missing} are missing from the joint training set")

    probe = fit_probe(np.concatenate([fs[s_train], ft[t_train]]), y_train, num_classes, probe_seq, settings)
    err_s = probe.error(fs[s_test], ys[s_test])
    err_t = probe.error(ft[t_test], yt[t_test])
    logger.info("Adaptability: err_s=%.4f err_t=%.4f sum=%.4f", err_s, err_t, err_s + err_t)
    return err_s, err_t, err_s + err_t
