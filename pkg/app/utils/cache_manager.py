import threading
from typing import Any, Callable, Dict, Optional

from cachetools import LRUCache

from app.config import settings


class DistanceCache:
    """In-memory LRU memo for pairwise window distances.

    Keys are (metric, bins, fingerprint, fingerprint) where the fingerprints
    hash the two windows' target values, so identical windows share entries
    across runs. Safe to share across worker threads.
    """

    def __init__(self, maxsize: Optional[int] = None):
        self.maxsize = maxsize or settings.distance_cache_size
        self.cache = LRUCache(maxsize=self.maxsize)
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()

    @staticmethod
    def make_key(metric: str, bins: int, first: str, second: str) -> tuple:
        # Distances are symmetric
        if first > second:
            first, second = second, first
        return (metric, bins if metric == "TVD" else 0, first, second)

    def get_or_compute(self, key: tuple, compute: Callable[[], float]) -> float:
        with self._lock:
            if key in self.cache:
                self.hits += 1
                return self.cache[key]
        value = compute()
        with self._lock:
            self.misses += 1
            self.cache[key] = value
        return value

    def clear(self):
        with self._lock:
            self.cache.clear()
            self.hits = 0
            self.misses = 0

    def get_cache_stats(self) -> Dict[str, Any]:
        with self._lock:
            lookups = self.hits + self.misses
            return {
                "size": len(self.cache),
                "maxsize": self.maxsize,
                "hits": self.hits,
                "misses": self.misses,
                "hit_rate": round(self.hits / lookups, 4) if lookups else 0.0,
            }


# Global cache instance
distance_cache = DistanceCache()
