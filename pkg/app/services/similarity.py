"""Distribution distances between windows and the reuse decision built on them."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import wasserstein_distance as _scipy_wasserstein

from app.errors import EmptyDistribution, NoCandidates
from app.schemas import ForecasterName, MetricName, SimilarityThreshold
from app.services.evaluation import CostLedger
from app.services.forecasting import ForecastDistribution, forecast_sa, forecast_window_es
from app.utils.cache_manager import DistanceCache, distance_cache

logger = logging.getLogger(__name__)

DEFAULT_TVD_BINS = 20
# Forecasts that reproduce a window up to rounding still count as similar
ACCEPT_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        if values.size == 0:
            raise EmptyDistribution("Empirical distribution needs at least one value")
        if not np.all(np.isfinite(values)):
            raise ValueError("Empirical distribution values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @cached_property
    def sorted_view(self) -> np.ndarray:
        return np.sort(self.values)

    def __len__(self) -> int:
        return int(self.values.size)


def _as_distribution(values) -> EmpiricalDistribution:
    return values if isinstance(values, EmpiricalDistribution) else EmpiricalDistribution(values)


def wasserstein_distance(p, q) -> float:
    """1-D W1 distance: the integral of |F_p - F_q| over the empirical CDFs."""
    p, q = _as_distribution(p), _as_distribution(q)
    return float(_scipy_wasserstein(p.sorted_view, q.sorted_view))


def total_variation_distance(p, q, bins: int = DEFAULT_TVD_BINS) -> float:
    """Half the L1 distance between equal-width histograms over the union range."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    p, q = _as_distribution(p), _as_distribution(q)
    low = min(p.sorted_view[0], q.sorted_view[0])
    high = max(p.sorted_view[-1], q.sorted_view[-1])
    if low == high:
        return 0.0
    p_counts, _ = np.histogram(p.values, bins=bins, range=(low, high))
    q_counts, _ = np.histogram(q.values, bins=bins, range=(low, high))
    return float(0.5 * np.abs(p_counts / p_counts.sum() - q_counts / q_counts.sum()).sum())


def distance(p, q, metric: MetricName, bins: int = DEFAULT_TVD_BINS) -> float:
    if metric == "WD":
        return wasserstein_distance(p, q)
    if metric == "TVD":
        return total_variation_distance(p, q, bins)
    raise ValueError(f"Unknown similarity metric '{metric}'")


def most_similar_prior(
    forecast: ForecastDistribution,
    priors: Sequence[Tuple[int, EmpiricalDistribution]],
    metric: MetricName,
    exclude_adjacent: bool,
    bins: int = DEFAULT_TVD_BINS,
) -> Tuple[int, float]:
    """Closest prior window to the forecast; ties go to the smallest index."""
    adjacent = forecast.for_window - 1
    candidates = sorted(
        ((index, dist) for index, dist in priors if not (exclude_adjacent and index == adjacent)),
        key=lambda candidate: candidate[0],
    )
    if not candidates:
        raise NoCandidates(f"No prior window left to compare window {forecast.for_window} against")

    target = EmpiricalDistribution(forecast.values)
    best_index, best_distance = None, np.inf
    for index, dist in candidates:
        d = distance(target, dist, metric, bins)
        if d < best_distance:
            best_index, best_distance = index, d
    return best_index, float(best_distance)


def pairwise_distances(windows: Sequence, metric: MetricName, bins: int = DEFAULT_TVD_BINS,
                       cache: Optional[DistanceCache] = None) -> np.ndarray:
    """Distances for every unordered pair of the given windows (upper triangle order)."""
    cache = cache or distance_cache
    values = []
    for first, second in zip(*np.triu_indices(len(windows), k=1)):
        a, b = windows[first], windows[second]
        key = DistanceCache.make_key(metric, bins, a.fingerprint, b.fingerprint)
        values.append(cache.get_or_compute(key, lambda a=a, b=b: distance(a.y, b.y, metric, bins)))
    return np.asarray(values, dtype=float)


def resolve_threshold(threshold: SimilarityThreshold, pairwise: np.ndarray) -> float:
    """Acceptance distance: a fixed value or a quantile of the observed pairwise distances."""
    if threshold.rule == "absolute":
        return float(threshold.value)
    if pairwise.size == 0:
        return 0.0
    return float(np.quantile(pairwise, threshold.value))


@dataclass(frozen=True)
class SimilarityEntry:
    source: int
    distance: float
    metric: MetricName


@dataclass
class SimilarityMap:
    """Window index -> most similar earlier window that may serve its model."""

    forecaster: ForecasterName
    metric: MetricName
    threshold: SimilarityThreshold
    entries: Dict[int, SimilarityEntry] = field(default_factory=dict)

    def add(self, window: int, entry: SimilarityEntry):
        # The adjacent window is covered by retraining
        assert entry.source < window - 1, f"entry {window}->{entry.source} is not strictly earlier than {window - 1}"
        self.entries[window] = entry

    def __contains__(self, window: int) -> bool:
        return window in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def rows(self, dataset: str) -> List[Dict[str, object]]:
        return [
            {
                "dataset": dataset,
                "metric": entry.metric,
                "forecaster": self.forecaster,
                "y_window": window,
                "x_window": entry.source,
                "distance": entry.distance,
            }
            for window, entry in sorted(self.entries.items())
        ]


def resolve_root(similarity_map: SimilarityMap, index: int) -> int:
    """Follow nested similarities (19 -> 15 -> 12) down to a window with no entry."""
    if index < 0:
        raise ValueError("index must be non-negative")
    current = index
    while current in similarity_map.entries:
        source = similarity_map.entries[current].source
        assert source < current, f"similarity chain does not decrease at {current}->{source}"
        current = source
    return current


@dataclass(frozen=True)
class ReuseDecision:
    window: int
    source: Optional[int]
    distance: Optional[float]
    threshold: Optional[float]
    forecast: Optional[ForecastDistribution] = None

    @property
    def accepted(self) -> bool:
        return self.source is not None


def forecast_window(windows: Sequence, t: int, forecaster: ForecasterName,
                    seasonal_period: Optional[int] = None) -> ForecastDistribution:
    if forecaster == "SA":
        return forecast_sa(windows, t)
    period = seasonal_period or windows[0].data.samples_per_day
    forecast = forecast_window_es(windows, t, period)
    clamped = forecast.clamped()
    if not np.array_equal(clamped.values, forecast.values):
        logger.debug(f"ES forecast for window {t} clamped to [0, 1]")
    return clamped


def decide_reuse(
    windows: Sequence,
    t: int,
    forecaster: ForecasterName,
    metric: MetricName,
    threshold: SimilarityThreshold,
    ledger: Optional[CostLedger] = None,
    bins: int = DEFAULT_TVD_BINS,
    seasonal_period: Optional[int] = None,
    cache: Optional[DistanceCache] = None,
) -> ReuseDecision:
    """Should window t be served by an earlier window's model?

    Only windows 0..t-1 are looked at. The forecast of window t is compared
    with every prior window; the adjacent window t-1 never qualifies because
    retraining covers it.
    """
    ledger = ledger or CostLedger()
    if t < 2:
        return ReuseDecision(window=t, source=None, distance=None, threshold=None)

    with ledger.timer("forecasting"):
        forecast = forecast_window(windows, t, forecaster, seasonal_period)

    with ledger.timer("similarity"):
        priors = [(w.index, EmpiricalDistribution(w.y)) for w in windows[:t]]
        try:
            source, d = most_similar_prior(forecast, priors, metric, exclude_adjacent=forecaster == "SA", bins=bins)
        except NoCandidates:
            return ReuseDecision(window=t, source=None, distance=None, threshold=None, forecast=forecast)
        theta = resolve_threshold(threshold, pairwise_distances(windows[:t], metric, bins, cache))

    accepted = source != t - 1 and d <= theta + ACCEPT_TOLERANCE
    logger.debug(
        f"Window {t}: closest prior {source} at {metric}={d:.6g}, threshold {theta:.6g} -> "
        f"{'reuse' if accepted else 'retrain'}"
    )
    return ReuseDecision(
        window=t,
        source=source if accepted else None,
        distance=d,
        threshold=theta,
        forecast=forecast,
    )


def build_similarity_map(
    windows: Sequence,
    forecaster: ForecasterName,
    metric: MetricName,
    threshold: SimilarityThreshold,
    ledger: Optional[CostLedger] = None,
    bins: int = DEFAULT_TVD_BINS,
    seasonal_period: Optional[int] = None,
) -> SimilarityMap:
    """Precompute the reuse decision for every window t >= 2."""
    if len(windows) < 3:
        raise ValueError(f"A similarity map needs at least 3 windows, got {len(windows)}")
    similarity_map = SimilarityMap(forecaster=forecaster, metric=metric, threshold=threshold)
    for t in range(2, len(windows)):
        decision = decide_reuse(windows[:t], t, forecaster, metric, threshold, ledger, bins, seasonal_period)
        if decision.accepted:
            similarity_map.add(t, SimilarityEntry(decision.source, decision.distance, metric))
    logger.info(f"Similarity map ({forecaster}/{metric}, {threshold.label}): {len(similarity_map)} entries")
    return similarity_map
