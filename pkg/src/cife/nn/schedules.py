"""Annealing schedules driven by normalized training progress p ∈ [0, 1]."""
import math

from cife.core.errors import ScheduleError
from cife.core.types import ScheduleParams


def _check_progress(p: float):
    if not 0.0 <= p <= 1.0:
        raise ScheduleError(f"training progress must lie in [0, 1], got {p}")


def progress(iteration: int, total_iterations: int) -> float:
    """Completed iterations over total iterations."""
    if total_iterations <= 0:
        return 0.0
    return min(1.0, iteration / total_iterations)


def lr_schedule(p: float, sp: ScheduleParams = ScheduleParams()) -> float:
    """η_p = η0 / (1 + θp)^β."""
    _check_progress(p)
    return sp.eta0 / (1.0 + sp.theta * p) ** sp.beta


def lambda_d_schedule(p: float, sp: ScheduleParams = ScheduleParams()) -> float:
    """(1 − e^{−δp}) / (1 + e^{−δp}), ramping λ_d from 0 towards 1."""
    _check_progress(p)
    decay = math.exp(-sp.delta * p)
    return (1.0 - decay) / (1.0 + decay)
