"""Frozen-feature caching with LRU eviction and file-based invalidation."""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from cachetools import LRUCache

logger = logging.getLogger(__name__)

CacheKey = Tuple[str, str, str, str]


@dataclass
class CacheEntry:
    """Cached feature matrix and the mtimes of the files it was computed from."""
    features: np.ndarray
    source_file_mtimes: Dict[str, float] = field(default_factory=dict)
    hit_count: int = 0

    def is_invalidated(self) -> bool:
        """True if any source file changed or disappeared since caching."""
        for file_path, cached_mtime in self.source_file_mtimes.items():
            try:
                if Path(file_path).stat().st_mtime_ns != cached_mtime:
                    return True
            except FileNotFoundError:
                return True
        return False


class _CountingLRU(LRUCache):
    """LRUCache that reports evictions to its owner."""

    def __init__(self, maxsize: int, on_evict: Callable[[], None]):
        super().__init__(maxsize=maxsize)
        self._on_evict = on_evict

    def popitem(self):
        item = super().popitem()
        self._on_evict()
        return item


class FeatureCache:
    """
    LRU cache of frozen feature matrices.

    Keys are (checkpoint path, dataset path, feature kind, split), both
    paths resolved. An entry is dropped
    on lookup when the checkpoint or dataset file it came from has been
    modified, so probes never read features of a stale model.

    Example:
        >>> cache = FeatureCache(max_size=32)
        >>> feats = cache.get_or_compute(ckpt, data, "invariant", "source", compute, [ckpt, data])
    """

    def __init__(self, max_size: int = 32, enable_file_invalidation: bool = True):
        """
        Initialize feature cache.

        Args:
            max_size: Maximum number of cached matrices
            enable_file_invalidation: Drop entries whose source files changed
        """
        if max_size < 1:
            raise ValueError(f"max_size must be >= 1, got {max_size}")
        self.max_size = max_size
        self.enable_file_invalidation = enable_file_invalidation
        self.entries: LRUCache = _CountingLRU(max_size, self._count_eviction)

        self.hits = 0
        self.misses = 0
        self.evictions = 0
        self.invalidations = 0

    def _count_eviction(self):
        self.evictions += 1

    @staticmethod
    def make_key(checkpoint: str, dataset: str, kind: str, split: str) -> CacheKey:
        return (str(Path(checkpoint).resolve()), str(Path(dataset).resolve()), kind, split)

    def get(self, checkpoint: str, dataset: str, kind: str, split: str) -> Optional[np.ndarray]:
        """
        Cached features, or None on a miss or an invalidated entry.
        """
        key = self.make_key(checkpoint, dataset, kind, split)
        entry = self.entries.get(key)
        if entry is None:
            self.misses += 1
            return None
        if self.enable_file_invalidation and entry.is_invalidated():
            del self.entries[key]
            self.invalidations += 1
            self.misses += 1
            logger.debug("Invalidated cached %s/%s features of %s on %s", kind, split, checkpoint, dataset)
            return None
        entry.hit_count += 1
        self.hits += 1
        return entry.features

    def put(self, checkpoint: str, dataset: str, kind: str, split: str, features: np.ndarray,
            source_files: Sequence[str] = ()):
        """
        Cache a feature matrix.

        Args:
            checkpoint: Checkpoint the features were computed with
            dataset: Dataset file the rows came from
            kind: Feature kind (e.g. "invariant")
            split: Dataset split (e.g. "source")
            features: Matrix to cache; stored read-only
            source_files: Files whose modification invalidates the entry
        """
        mtimes = {}
        if self.enable_file_invalidation:
            for file_path in source_files:
                try:
                    mtimes[str(file_path)] = Path(file_path).stat().st_mtime_ns
                except FileNotFoundError:
                    pass
        stored = np.array(features, dtype=np.float64)
        stored.setflags(write=False)
        self.entries[self.make_key(checkpoint, dataset, kind, split)] = CacheEntry(stored, mtimes)

    def get_or_compute(self, checkpoint: str, dataset: str, kind: str, split: str,
                       compute: Callable[[], np.ndarray], source_files: Sequence[str] = ()) -> np.ndarray:
        features = self.get(checkpoint, dataset, kind, split)
        if features is None:
            features = compute()
            self.put(checkpoint, dataset, kind, split, features, source_files)
            features = self.entries[self.make_key(checkpoint, dataset, kind, split)].features
        return features

    def clear(self):
        """Clear all entries and statistics."""
        self.entries.clear()
        self.hits = 0
        self.misses = 0
        self.evictions = 0
        self.invalidations = 0

    def stats(self) -> Dict[str, Any]:
        total_requests = self.hits + self.misses
        return {
            "size": len(self.entries),
            "max_size": self.max_size,
            "hits": self.hits,
            "misses": self.misses,
            "hit_rate": self.hits / total_requests if total_requests > 0 else 0.0,
            "evictions": self.evictions,
            "invalidations": self.invalidations,
            "total_requests": total_requests,
        }
