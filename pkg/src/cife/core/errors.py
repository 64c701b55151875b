"""Exception hierarchy shared by every cife module."""
from typing import Optional, Sequence


class CifeError(Exception):
    """Base class for all library errors."""


class ShapeError(CifeError, ValueError):
    """Operand shapes are incompatible for an operation."""

    def __init__(self, op: str, left: Sequence[int], right: Optional[Sequence[int]] = None):
        self.op = op
        self.left = tuple(left)
        self.right = tuple(right) if right is not None else None
        if self.right is None:
            message = f"{op}: invalid shape {self.left}"
        else:
            message = f"{op}: incompatible shapes {self.left} and {self.right}"
        super().__init__(message)


class DomainError(CifeError, ValueError):
    """Input lies outside the mathematical domain of an operation."""


class LabelError(CifeError, ValueError):
    """Class labels are out of range or otherwise invalid."""


class ScheduleError(CifeError, ValueError):
    """Schedule progress or parameters out of range."""


class MissingGradientError(CifeError, RuntimeError):
    """An optimizer step was requested for a parameter without a gradient."""


class DatasetFormatError(CifeError, ValueError):
    """Dataset file could not be parsed."""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (at byte offset {offset})")


class DatasetValidationError(CifeError, ValueError):
    """Dataset contents violate an invariant."""


class CheckpointError(CifeError, ValueError):
    """Checkpoint file is malformed or incompatible."""


class TrainingDivergedError(CifeError, RuntimeError):
    """A loss term became NaN or infinite during training."""

    def __init__(self, term: str, iteration: int, value: float):
        self.term = term
        self.iteration = iteration
        self.value = value
        super().__init__(
            f"Training diverged: loss term '{term}' is {value} at iteration {iteration}"
        )


class ProbeError(CifeError, ValueError):
    """Probe inputs are degenerate."""


class ConfigError(CifeError, ValueError):
    """Experiment configuration is invalid."""
