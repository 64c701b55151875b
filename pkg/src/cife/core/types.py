"""Core data types and structures."""
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple


# Grid explored for the category-alignment weight
LAMBDA_C_GRID: Tuple[float, ...] = (0.0001, 0.001, 0.01, 0.1, 1.0)


class Variant(Enum):
    """Training variants."""
    SOURCE_ONLY = "source-only"
    DANN = "dann"
    CDAN = "cdan"
    CIFE_DANN = "cife-dann"
    CIFE_CDAN = "cife-cdan"

    @property
    def aligns_domains(self) -> bool:
        """Whether a domain discriminator game is played."""
        return self is not Variant.SOURCE_ONLY

    @property
    def aligns_categories(self) -> bool:
        """Whether the F_d / D_t category game is played."""
        return self in (Variant.CIFE_DANN, Variant.CIFE_CDAN)

    @property
    def conditioned(self) -> bool:
        """Whether the domain discriminator sees feature ⊗ prediction."""
        return self in (Variant.CDAN, Variant.CIFE_CDAN)


class UpdateMode(Enum):
    """How the minimax game is optimized per iteration."""
    REVERSAL = "reversal"
    TWO_PHASE = "two-phase"


class HeadKind(Enum):
    """Output head of an Mlp."""
    IDENTITY = "identity"
    SIGMOID = "sigmoid"
    SOFTMAX_LOGITS = "softmax-logits"


class FeatureKind(Enum):
    """Which frozen representation a probe reads."""
    INVARIANT = "invariant"
    SPECIFIC = "specific"
    CLASSIFIER_INPUT = "classifier-input"


class ProbeKind(Enum):
    """Diagnostics available from the probe command."""
    A_DISTANCE = "a-distance"
    ADAPTABILITY = "adaptability"
    FEATURES = "features"
    ALL = "all"


@dataclass(frozen=True)
class ScheduleParams:
    """
    Learning-rate and λ_d schedule constants.

    eta0, theta, beta parameterize η_p = η0 / (1 + θp)^β and delta
    parameterizes the λ_d ramp (1 - e^{-δp}) / (1 + e^{-δp}).
    """
    eta0: float = 0.01
    theta: float = 10.0
    beta: float = 0.75
    delta: float = 10.0

    def __post_init__(self):
        for name in ("eta0", "theta", "beta", "delta"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"ScheduleParams.{name} must be strictly positive, got {value}")


@dataclass(frozen=True)
class TrainConfig:
    """All optimization hyperparameters of one training run."""
    variant: Variant = Variant.CIFE_DANN
    epochs: int = 60
    batch_size: int = 64
    schedule: ScheduleParams = field(default_factory=ScheduleParams)
    lambda_c: float = 1.0
    prediction_draws: int = 8
    seed: int = 0
    update_mode: UpdateMode = UpdateMode.REVERSAL
    momentum: float = 0.9
    allow_off_grid: bool = False

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.prediction_draws < 1:
            raise ValueError(f"prediction_draws must be >= 1, got {self.prediction_draws}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.lambda_c < 0:
            raise ValueError(f"lambda_c must be >= 0, got {self.lambda_c}")
        if not self.allow_off_grid and self.lambda_c not in LAMBDA_C_GRID:
            raise ValueError(
                f"lambda_c={self.lambda_c} is not in the grid {LAMBDA_C_GRID}; "
                "set allow_off_grid to use other values"
            )

    def with_seed(self, seed: int) -> "TrainConfig":
        """Copy of this config with another seed."""
        return replace(self, seed=seed)

    def with_lambda_c(self, lambda_c: float) -> "TrainConfig":
        """Copy of this config with another λ_c."""
        return replace(self, lambda_c=lambda_c)

    def with_variant(self, variant: Variant) -> "TrainConfig":
        """Copy of this config with another variant."""
        return replace(self, variant=variant)

    def to_record(self) -> Dict[str, Any]:
        """Plain-dict form with enums as their values."""
        record = asdict(self)
        record["variant"] = self.variant.value
        record["update_mode"] = self.update_mode.value
        return record

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> "TrainConfig":
        """Inverse of to_record."""
        values = dict(record)
        values["variant"] = Variant(values["variant"])
        values["update_mode"] = UpdateMode(values["update_mode"])
        values["schedule"] = ScheduleParams(**values["schedule"])
        return cls(**values)


@dataclass(frozen=True)
class EpochMetrics:
    """Averages and evaluation results for one training epoch."""
    epoch: int
    l_c: float
    l_d: float
    l_dc: float
    lr: float
    lambda_d: float
    source_accuracy: float
    target_accuracy: float

    def __post_init__(self):
        for name in ("source_accuracy", "target_accuracy"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")

    def to_record(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class ReplicateSummary:
    """Target-test accuracy aggregated over seeded replicates."""
    mean: float
    std: float
    accuracies: Tuple[float, ...]
    seeds: Tuple[int, ...]

    def summary(self) -> str:
        return f"{self.mean * 100:.1f}±{self.std * 100:.1f}"


@dataclass(frozen=True)
class SweepRow:
    """One λ_c entry of a sensitivity sweep."""
    lambda_c: float
    mean_acc: float
    std_acc: float


@dataclass
class ProbeReport:
    """
    Measured diagnostic quantities.

    Any subset of the probes may be filled in; d_a is always derived
    from epsilon so the identity d_A = 2(1 - 2ε) holds exactly.
    """
    epsilon: Optional[float] = None
    d_a: Optional[float] = None
    joint_error_source: Optional[float] = None
    joint_error_target: Optional[float] = None
    joint_error_sum: Optional[float] = None
    category_on_specific: Optional[float] = None
    category_on_invariant: Optional[float] = None
    domain_on_invariant: Optional[float] = None
    lambda_c_table: List[SweepRow] = field(default_factory=list)

    def __post_init__(self):
        if self.epsilon is not None:
            if not 0.0 <= self.epsilon <= 0.5:
                raise ValueError(f"epsilon must lie in [0, 0.5], got {self.epsilon}")
            self.d_a = 2.0 * (1.0 - 2.0 * self.epsilon)
        for name in (
            "joint_error_source",
            "joint_error_target",
            "category_on_specific",
            "category_on_invariant",
            "domain_on_invariant",
        ):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")

    def merge(self, other: "ProbeReport") -> "ProbeReport":
        """Combine two partial reports, preferring fields set in ``other``."""
        values = {}
        for name in self.__dataclass_fields__:
            mine, theirs = getattr(self, name), getattr(other, name)
            if name == "lambda_c_table":
                values[name] = list(theirs or mine)
            else:
                values[name] = theirs if theirs is not None else mine
        values["d_a"] = None
        return ProbeReport(**values)

    def to_record(self) -> Dict[str, Any]:
        """Dict with unset probes omitted."""
        record: Dict[str, Any] = {}
        for name in self.__dataclass_fields__:
            value = getattr(self, name)
            if name == "lambda_c_table":
                if value:
                    record[name] = [asdict(row) for row in value]
            elif value is not None:
                record[name] = value
        return record
