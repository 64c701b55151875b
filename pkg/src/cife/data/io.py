"""
Versioned binary dataset files.

Layout (all integers little-endian):

    magic            8 bytes  b"CIFEDS\\x00\\x01"
    version          u16
    flags            u16      bit 0: withheld target labels present
    num_classes      u32
    input_dim        u32
    n_source         u32
    n_target         u32
    n_test           u32
    source features  n_source × input_dim f8
    source labels    n_source u16
    target features  n_target × input_dim f8
    test features    n_test × input_dim f8
    test labels      n_test u16
    withheld labels  n_target u16 (only if flag bit 0 is set)
"""
import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from cife.core.errors import DatasetFormatError, DatasetValidationError
from cife.data.dataset import DomainDataset, LabeledSplit, UnlabeledSplit

logger = logging.getLogger(__name__)

MAGIC = b"CIFEDS\x00\x01"
FORMAT_VERSION = 1
FLAG_WITHHELD_LABELS = 0x1
_HEADER = struct.Struct("<HHIIIII")
_MAX_LABEL = np.iinfo(np.uint16).max


class _Reader:
    """Cursor over a byte buffer that reports where parsing failed."""

    def __init__(self, buffer: bytes):
        self.buffer = buffer
        self.offset = 0

    def take(self, size: int, what: str) -> bytes:
        remaining = len(self.buffer) - self.offset
        if size > remaining:
            raise DatasetFormatError(f"truncated {what}: need {size} bytes, {remaining} left", self.offset)
        chunk = self.buffer[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def floats(self, rows: int, cols: int, what: str) -> np.ndarray:
        raw = self.take(rows * cols * 8, what)
        return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(rows, cols)

    def labels(self, count: int, what: str) -> np.ndarray:
        raw = self.take(count * 2, what)
        return np.frombuffer(raw, dtype="<u2").astype(np.int64)


def dataset_bytes(ds: DomainDataset) -> bytes:
    """Serialized form of ``ds``."""
    if ds.num_classes > _MAX_LABEL + 1:
        raise DatasetValidationError(f"num_classes {ds.num_classes} does not fit 16-bit labels")
    flags = FLAG_WITHHELD_LABELS if ds.withheld_target_labels is not None else 0
    parts = [
        MAGIC,
        _HEADER.pack(
            FORMAT_VERSION, flags, ds.num_classes, ds.input_dim,
            len(ds.source), len(ds.target_train), len(ds.target_test),
        ),
        ds.source.features.astype("<f8").tobytes(),
        ds.source.labels.astype("<u2").tobytes(),
        ds.target_train.features.astype("<f8").tobytes(),
        ds.target_test.features.astype("<f8").tobytes(),
        ds.target_test.labels.astype("<u2").tobytes(),
    ]
    if ds.withheld_target_labels is not None:
        parts.append(ds.withheld_target_labels.astype("<u2").tobytes())
    return b"".join(parts)


def parse_dataset(buffer: bytes) -> DomainDataset:
    """
    Inverse of dataset_bytes.

    Raises:
        DatasetFormatError: Bad magic, unknown version, truncation or
            trailing bytes; carries the byte offset of the failure
        DatasetValidationError: Well-formed file whose contents violate a
            dataset invariant, such as a label >= num_classes
    """
    reader = _Reader(buffer)
    magic = reader.take(len(MAGIC), "magic")
    if magic != MAGIC:
        raise DatasetFormatError(f"bad magic {magic!r}", 0)
    header_offset = reader.offset
    version, flags, num_classes, input_dim, n_source, n_target, n_test = _HEADER.unpack(
        reader.take(_HEADER.size, "header")
    )
    if version != FORMAT_VERSION:
        raise DatasetFormatError(f"unsupported format version {version}", header_offset)
    if flags & ~FLAG_WITHHELD_LABELS:
        raise DatasetFormatError(f"unknown flags 0x{flags:04x}", header_offset + 2)
    if input_dim < 1:
        raise DatasetFormatError("input_dim must be positive", header_offset + 8)

    xs = reader.floats(n_source, input_dim, "source features")
    ys = reader.labels(n_source, "source labels")
    xt = reader.floats(n_target, input_dim, "target features")
    x_test = reader.floats(n_test, input_dim, "test features")
    y_test = reader.labels(n_test, "test labels")
    withheld = reader.labels(n_target, "withheld target labels") if flags & FLAG_WITHHELD_LABELS else None
    if reader.offset != len(buffer):
        raise DatasetFormatError(f"{len(buffer) - reader.offset} trailing bytes", reader.offset)

    return DomainDataset(
        source=LabeledSplit(xs, ys),
        target_train=UnlabeledSplit(xt),
        target_test=LabeledSplit(x_test, y_test),
        num_classes=num_classes,
        withheld_target_labels=withheld,
    )


def save_dataset(path: Union[str, Path], ds: DomainDataset) -> Path:
    """Write ``ds`` to ``path``; equal datasets give byte-identical files."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dataset_bytes(ds))
    logger.info("Wrote dataset (%d source, %d target rows) to %s", len(ds.source), len(ds.target_train), path)
    return path


def load_dataset(path: Union[str, Path]) -> DomainDataset:
    """Read a dataset file written by save_dataset."""
    return parse_dataset(Path(path).read_bytes())
