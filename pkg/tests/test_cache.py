import os

import numpy as np
import pytest

from cife.cache.feature_cache import FeatureCache

DATA = "data/task.npz"


@pytest.fixture
def checkpoint(tmp_path):
    path = tmp_path / "checkpoint.json"
    path.write_text("{}")
    return path


def touch_later(path):
    stat = path.stat()
    os.utime(path, ns=(stat.st_atime_ns, stat.st_mtime_ns + 1_000_000_000))


class TestFeatureCache:
    def test_miss_then_hit(self, checkpoint):
        cache = FeatureCache()
        calls = []

        def compute():
            calls.append(1)
            return np.ones((2, 3))

        first = cache.get_or_compute(str(checkpoint), DATA, "invariant", "source", compute, [str(checkpoint)])
        second = cache.get_or_compute(str(checkpoint), DATA, "invariant", "source", compute, [str(checkpoint)])
        assert len(calls) == 1
        np.testing.assert_array_equal(first, second)
        assert cache.stats()["hits"] == 1
        assert cache.stats()["misses"] == 1

    def test_keys_separate_kind_and_split(self, checkpoint):
        cache = FeatureCache()
        cache.put(str(checkpoint), DATA, "invariant", "source", np.zeros((1, 1)))
        assert cache.get(str(checkpoint), DATA, "invariant", "target") is None
        assert cache.get(str(checkpoint), DATA, "specific", "source") is None

    def test_keys_separate_datasets(self, checkpoint, tmp_path):
        cache = FeatureCache()
        cache.put(str(checkpoint), str(tmp_path / "a.npz"), "invariant", "source", np.zeros((1, 1)))
        assert cache.get(str(checkpoint), str(tmp_path / "b.npz"), "invariant", "source") is None
        assert cache.get(str(checkpoint), str(tmp_path / "a.npz"), "invariant", "source") is not None

    def test_dataset_path_is_resolved(self, checkpoint, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        cache = FeatureCache()
        cache.put(str(checkpoint), "a.npz", "invariant", "source", np.zeros((1, 1)))
        assert cache.get(str(checkpoint), str(tmp_path / "a.npz"), "invariant", "source") is not None

    def test_modified_file_invalidates(self, checkpoint):
        cache = FeatureCache()
        cache.put(str(checkpoint), DATA, "invariant", "source", np.zeros((2, 2)), [str(checkpoint)])
        touch_later(checkpoint)
        assert cache.get(str(checkpoint), DATA, "invariant", "source") is None
        assert cache.stats()["invalidations"] == 1

    def test_deleted_file_invalidates(self, checkpoint):
        cache = FeatureCache()
        cache.put(str(checkpoint), DATA, "invariant", "source", np.zeros((2, 2)), [str(checkpoint)])
        checkpoint.unlink()
        assert cache.get(str(checkpoint), DATA, "invariant", "source") is None

    def test_invalidation_can_be_disabled(self, checkpoint):
        cache = FeatureCache(enable_file_invalidation=False)
        cache.put(str(checkpoint), DATA, "invariant", "source", np.zeros((2, 2)), [str(checkpoint)])
        touch_later(checkpoint)
        assert cache.get(str(checkpoint), DATA, "invariant", "source") is not None

    def test_lru_eviction(self, checkpoint):
        cache = FeatureCache(max_size=2)
        for split in ("a", "b"):
            cache.put(str(checkpoint), DATA, "invariant", split, np.zeros(1))
        cache.get(str(checkpoint), DATA, "invariant", "a")
        cache.put(str(checkpoint), DATA, "invariant", "c", np.zeros(1))
        assert cache.stats()["evictions"] == 1
        assert cache.get(str(checkpoint), DATA, "invariant", "b") is None
        assert cache.get(str(checkpoint), DATA, "invariant", "a") is not None

    def test_cached_features_are_read_only(self, checkpoint):
        cache = FeatureCache()
        features = cache.get_or_compute(str(checkpoint), DATA, "invariant", "source", lambda: np.zeros((2, 2)))
        with pytest.raises(ValueError):
            features[0, 0] = 1.0

    def test_clear_resets_statistics(self, checkpoint):
        cache = FeatureCache(max_size=1)
        cache.put(str(checkpoint), DATA, "invariant", "a", np.zeros(1))
        cache.put(str(checkpoint), DATA, "invariant", "b", np.zeros(1))
        cache.clear()
        stats = cache.stats()
        assert stats["size"] == 0
        assert stats["evictions"] == 0
        assert stats["hit_rate"] == 0.0

    def test_size_must_be_positive(self):
        with pytest.raises(ValueError):
            FeatureCache(max_size=0)
