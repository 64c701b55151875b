"""In-memory domain-adaptation datasets."""
import hashlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

from cife.core.errors import DatasetValidationError


def _frozen(values: np.ndarray, dtype) -> np.ndarray:
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class LabeledSplit:
    """Rows with class labels."""
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "features", _frozen(self.features, np.float64))
        object.__setattr__(self, "labels", _frozen(self.labels, np.int64))
        if self.features.ndim != 2:
            raise DatasetValidationError(f"features must be 2-D, got shape {self.features.shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise DatasetValidationError(
                f"{self.features.shape[0]} rows but labels of shape {self.labels.shape}"
            )

    def __len__(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True, eq=False)
class UnlabeledSplit:
    """Rows without labels. This is the only form in which target-train data reaches training."""
    features: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "features", _frozen(self.features, np.float64))
        if self.features.ndim != 2:
            raise DatasetValidationError(f"features must be 2-D, got shape {self.features.shape}")

    def __len__(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True, eq=False)
class TrainingView:
    """What training may see: labeled source rows and label-free target rows."""
    source: LabeledSplit
    target: UnlabeledSplit
    num_classes: int

    @property
    def input_dim(self) -> int:
        return self.source.features.shape[1]


@dataclass(frozen=True, eq=False)
class DomainDataset:
    """
    Labeled source data, unlabeled target-train data and a labeled
    target-test split over one label space {0..K-1}.

    Target-train labels, when the generator knows them, are kept in
    ``withheld_target_labels`` for evaluation-only probes and are never
    part of the training view.
    """
    source: LabeledSplit
    target_train: UnlabeledSplit
    target_test: LabeledSplit
    num_classes: int
    withheld_target_labels: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.num_classes < 2:
            raise DatasetValidationError(f"need at least two classes, got {self.num_classes}")
        widths = {self.source.features.shape[1], self.target_train.features.shape[1],
                  self.target_test.features.shape[1]}
        if len(widths) != 1:
            raise DatasetValidationError(f"splits disagree on input width: {sorted(widths)}")
        for name, labels in (("source", self.source.labels), ("target_test", self.target_test.labels)):
            if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
                raise DatasetValidationError(
                    f"{name} labels must lie in [0, {self.num_classes}), got max {labels.max()}"
                )
        if self.withheld_target_labels is not None:
            withheld = _frozen(self.withheld_target_labels, np.int64)
            if withheld.shape != (len(self.target_train),):
                raise DatasetValidationError(
                    f"withheld labels shape {withheld.shape} does not match {len(self.target_train)} target rows"
                )
            if withheld.size and (withheld.min() < 0 or withheld.max() >= self.num_classes):
                raise DatasetValidationError(f"withheld labels must lie in [0, {self.num_classes})")
            object.__setattr__(self, "withheld_target_labels", withheld)

    @property
    def input_dim(self) -> int:
        return self.source.features.shape[1]

    def training_view(self) -> TrainingView:
        return TrainingView(source=self.source, target=self.target_train, num_classes=self.num_classes)

    def checksum(self) -> str:
        """sha256 over every array, in a fixed order."""
        digest = hashlib.sha256()
        digest.update(str(self.num_classes).encode())
        arrays = [
            self.source.features, self.source.labels,
            self.target_train.features, self.target_test.features, self.target_test.labels,
        ]
        if self.withheld_target_labels is not None:
            arrays.append(self.withheld_target_labels)
        for array in arrays:
            digest.update(str(array.shape).encode())
            digest.update(np.ascontiguousarray(array).tobytes())
        return digest.hexdigest()

    def equals(self, other: "DomainDataset") -> bool:
        """Bit-exact equality of every split."""
        return self.checksum() == other.checksum()
