"""Caching of frozen feature matrices."""
from cife.cache.feature_cache import FeatureCache

__all__ = ["FeatureCache"]
