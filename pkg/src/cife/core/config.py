"""
Experiment configuration.

Configs are flat ``section.key=value`` text: one assignment per line,
``#`` starts a comment, blank lines are ignored. Every key has a default
and unknown keys are rejected.

Example:
    # train a CIFE+DANN model on the default task
    model.variant=cife-dann
    train.lambda_c=1.0
    train.epochs=60
"""
import hashlib
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Tuple, Union, get_type_hints

from cife.core.errors import ConfigError
from cife.core.types import ProbeKind, ScheduleParams, TrainConfig, UpdateMode, Variant

_TRUE = {"true", "yes", "1", "on"}
_FALSE = {"false", "no", "0", "off"}


@dataclass(frozen=True)
class DatasetSection:
    """Where the dataset comes from: a file, or a generator and its parameters."""
    kind: str = "factorized"
    path: str = ""
    num_classes: int = 4
    input_dim: int = 20
    class_dim: int = 4
    nuisance_dim: int = 4
    noise: float = 0.25
    n_source: int = 2000
    n_target: int = 2000
    n_test: int = 1000
    shift_strength: float = 0.5
    nuisance_offset: float = 1.0
    angle: float = 30.0
    seed: int = 0


@dataclass(frozen=True)
class ModelSection:
    variant: Variant = Variant.CIFE_DANN
    extractor_hidden: Tuple[int, ...] = (64, 64)
    invariant_dim: int = 32
    specific_dim: int = 32
    head_hidden: int = 32


@dataclass(frozen=True)
class TrainSection:
    epochs: int = 60
    batch_size: int = 64
    eta0: float = 0.01
    theta: float = 10.0
    beta: float = 0.75
    delta: float = 10.0
    lambda_c: float = 1.0
    prediction_draws: int = 8
    seed: int = 0
    update_mode: UpdateMode = UpdateMode.REVERSAL
    momentum: float = 0.9
    allow_off_grid: bool = False
    n_runs: int = 3
    workers: int = 1


@dataclass(frozen=True)
class ProbeSection:
    kinds: Tuple[str, ...] = ("all",)
    seed: int = 0
    hidden: int = 64
    epochs: int = 200
    batch_size: int = 64


@dataclass(frozen=True)
class OutputSection:
    dir: str = "runs"


@dataclass(frozen=True)
class ExperimentConfig:
    """All settings of one experiment, grouped by section."""
    dataset: DatasetSection = field(default_factory=DatasetSection)
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainSection = field(default_factory=TrainSection)
    probes: ProbeSection = field(default_factory=ProbeSection)
    output: OutputSection = field(default_factory=OutputSection)

    def sections(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_text(self) -> str:
        """Canonical form: every key, sorted, one per line."""
        lines = []
        for section_name, section in sorted(self.sections().items()):
            for f in sorted(fields(section), key=lambda f: f.name):
                lines.append(f"{section_name}.{f.name}={_format(getattr(section, f.name))}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        """First 16 hex digits of sha256 over the canonical text."""
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]

    def with_overrides(self, assignments: Iterable[str]) -> "ExperimentConfig":
        """Apply ``section.key=value`` assignments in order."""
        config = self
        for assignment in assignments:
            key, value = _split_assignment(assignment, origin="override")
            config = config.set(key, value)
        return config

    def set(self, dotted_key: str, raw: str) -> "ExperimentConfig":
        """Copy with one key replaced by the coerced ``raw`` value."""
        section_name, _, key = dotted_key.partition(".")
        sections = self.sections()
        if section_name not in sections or not key:
            raise ConfigError(f"unknown config section in '{dotted_key}'")
        section = sections[section_name]
        hints = get_type_hints(type(section))
        if key not in hints:
            raise ConfigError(f"unknown config key '{dotted_key}'")
        value = _coerce(raw, hints[key], dotted_key)
        return replace(self, **{section_name: replace(section, **{key: value})})

    def train_config(self) -> TrainConfig:
        """TrainConfig for this experiment; invalid values raise ConfigError."""
        t = self.train
        try:
            return TrainConfig(
                variant=self.model.variant,
                epochs=t.epochs,
                batch_size=t.batch_size,
                schedule=ScheduleParams(eta0=t.eta0, theta=t.theta, beta=t.beta, delta=t.delta),
                lambda_c=t.lambda_c,
                prediction_draws=t.prediction_draws,
                seed=t.seed,
                update_mode=t.update_mode,
                momentum=t.momentum,
                allow_off_grid=t.allow_off_grid,
            )
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def probe_kinds(self) -> List[ProbeKind]:
        try:
            return [ProbeKind(kind) for kind in self.probes.kinds]
        except ValueError as e:
            raise ConfigError(f"probes.kinds: {e}") from e


def _format(value: Any) -> str:
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _coerce(raw: str, tp: Any, key: str) -> Any:
    raw = raw.strip()
    try:
        if isinstance(tp, type) and issubclass(tp, Enum):
            return tp(raw)
        if tp is bool:
            lowered = raw.lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if tp is int:
            return int(raw)
        if tp is float:
            return float(raw)
        if tp is str:
            return raw
        if getattr(tp, "__origin__", None) is tuple:
            item_type = tp.__args__[0]
            return tuple(_coerce(part, item_type, key) for part in raw.split(",") if part.strip())
    except ValueError as e:
        raise ConfigError(f"invalid value for '{key}': {e}") from e
    raise ConfigError(f"unsupported type for '{key}'")


def _split_assignment(line: str, origin: str) -> Tuple[str, str]:
    if "=" not in line:
        raise ConfigError(f"{origin}: expected 'section.key=value', got {line!r}")
    key, _, value = line.partition("=")
    key = key.strip()
    if "." not in key:
        raise ConfigError(f"{origin}: key {key!r} needs a section prefix")
    return key, value


def parse_config_text(text: str, origin: str = "<text>") -> ExperimentConfig:
    """
    Parse config text onto the defaults.

    Raises:
        ConfigError: On malformed lines, unknown keys or bad values
    """
    config = ExperimentConfig()
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        key, value = _split_assignment(stripped, f"{origin}:{number}")
        config = config.set(key, value)
    return config


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return parse_config_text(text, origin=str(path))
