"""Scoring, Mann-Whitney comparison and maintenance-cost accounting."""
from __future__ import annotations

import itertools
import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, Iterator, List, Literal, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, model_validator
from scipy.stats import mannwhitneyu

from app.errors import EmptyInput, EmptySample, LengthMismatch, MisalignedReports, NegativeDuration

if TYPE_CHECKING:
    from app.services.strategies import StrategyReport

logger = logging.getLogger(__name__)

Category = Literal["training", "prediction", "forecasting", "similarity"]
CATEGORIES: Tuple[Category, ...] = ("training", "prediction", "forecasting", "similarity")
DEFAULT_HOURLY_RATE = 0.115
SIGNIFICANCE_LEVEL = 0.05
EXACT_TEST_MAX_SIZE = 16


def financial_cost(seconds: float, hourly_rate: float = DEFAULT_HOURLY_RATE) -> float:
    """Hourly rate times minutes / 60."""
    if seconds < 0:
        raise NegativeDuration(f"Operation time cannot be negative ({seconds} s)")
    return hourly_rate * (seconds / 60.0) / 60.0


@dataclass(frozen=True)
class LedgerEntry:
    category: Category
    seconds: float


@dataclass
class CostLedger:
    """Per-run record of operation times by category."""

    hourly_rate: float = DEFAULT_HOURLY_RATE
    entries: List[LedgerEntry] = field(default_factory=list)

    def record(self, category: Category, seconds: float) -> float:
        if category not in CATEGORIES:
            raise ValueError(f"Unknown ledger category '{category}'")
        if seconds < 0:
            raise NegativeDuration(f"Operation time cannot be negative ({seconds} s)")
        self.entries.append(LedgerEntry(category, float(seconds)))
        return float(seconds)

    @contextmanager
    def timer(self, category: Category) -> Iterator[None]:
        started = time.perf_counter()
        try:
            yield
        finally:
            self.record(category, time.perf_counter() - started)

    def totals(self) -> Dict[str, float]:
        totals = {c: 0.0 for c in CATEGORIES}
        for entry in self.entries:
            totals[entry.category] += entry.seconds
        return totals

    def count(self, category: Category) -> int:
        return sum(1 for e in self.entries if e.category == category)

    @property
    def total_seconds(self) -> float:
        return sum(e.seconds for e in self.entries)

    def cost(self, category: Optional[Category] = None) -> float:
        seconds = self.total_seconds if category is None else self.totals()[category]
        return financial_cost(seconds, self.hourly_rate)

    def merge(self, other: "CostLedger"):
        self.entries.extend(other.entries)

    def summary(self) -> Dict[str, Dict[str, float]]:
        totals = self.totals()
        summary = {c: {"seconds": totals[c], "cost": financial_cost(totals[c], self.hourly_rate)} for c in CATEGORIES}
        summary["total"] = {"seconds": self.total_seconds, "cost": self.cost()}
        return summary


def mse(y, y_hat) -> float:
    y = np.asarray(y, dtype=float).ravel()
    y_hat = np.asarray(y_hat, dtype=float).ravel()
    if y.shape != y_hat.shape:
        raise LengthMismatch(f"Cannot score {y_hat.shape[0]} predictions against {y.shape[0]} targets")
    if y.shape[0] == 0:
        raise EmptyInput("Cannot score an empty target vector")
    return float(np.mean((y - y_hat) ** 2))


def mann_whitney_u(a: Sequence[float], b: Sequence[float]) -> Tuple[float, float]:
    """Two-sided Mann-Whitney U for sample `a`.

    The p-value is exact for tie-free samples of combined size up to 16 and
    otherwise uses the normal approximation with tie and continuity
    corrections.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise EmptySample("Mann-Whitney U needs two non-empty samples")

    pooled = np.concatenate([a, b])
    if np.all(pooled == pooled[0]):
        # Zero variance under ties: no evidence of a difference
        return a.size * b.size / 2.0, 1.0

    has_ties = np.unique(pooled).size < pooled.size
    method = "exact" if pooled.size <= EXACT_TEST_MAX_SIZE and not has_ties else "asymptotic"
    result = mannwhitneyu(a, b, alternative="two-sided", method=method, use_continuity=True)
    return float(result.statistic), float(min(1.0, result.pvalue))


class ComparisonResult(BaseModel):
    """One row of the pairwise comparison table."""

    strategy_a: str
    strategy_b: str
    u: float
    p_value: float
    significant: bool
    granularity: Literal["per_window", "per_configuration"] = "per_window"
    n_a: int
    n_b: int
    mean_a: float
    mean_b: float

    @model_validator(mode="after")
    def check_significance(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")
        if self.significant != (self.p_value < SIGNIFICANCE_LEVEL):
            raise ValueError("significant must equal p_value < 0.05")
        return self

    @property
    def pair(self) -> Tuple[str, str]:
        return self.strategy_a, self.strategy_b


def compare_samples(
    label_a: str,
    sample_a: Sequence[float],
    label_b: str,
    sample_b: Sequence[float],
    granularity: Literal["per_window", "per_configuration"] = "per_configuration",
) -> ComparisonResult:
    u, p = mann_whitney_u(sample_a, sample_b)
    return ComparisonResult(
        strategy_a=label_a,
        strategy_b=label_b,
        u=u,
        p_value=p,
        significant=p < SIGNIFICANCE_LEVEL,
        granularity=granularity,
        n_a=len(sample_a),
        n_b=len(sample_b),
        mean_a=float(np.mean(sample_a)),
        mean_b=float(np.mean(sample_b)),
    )


def compare_strategies(reports: Sequence["StrategyReport"]) -> List[ComparisonResult]:
    """Pairwise Mann-Whitney tests on the per-window MSE lists, in input order."""
    if len(reports) < 2:
        raise MisalignedReports(f"Need at least 2 reports to compare, got {len(reports)}")
    reference = reports[0].window_indices
    for report in reports[1:]:
        if report.window_indices != reference:
            raise MisalignedReports(
                f"'{report.label}' scored windows {report.window_indices}, "
                f"'{reports[0].label}' scored {reference}"
            )

    results = []
    for first, second in itertools.combinations(reports, 2):
        result = compare_samples(first.label, first.window_mses, second.label, second.window_mses, "per_window")
        logger.debug(f"{result.strategy_a} vs {result.strategy_b}: U={result.u} p={result.p_value:.4g}")
        results.append(result)
    return results


def operation_time_ratio(
    periodic_operations: Mapping[str, float],
    reuse_operations: Mapping[str, float],
) -> Optional[float]:
    """Maximum periodic operation time divided by maximum reuse operation time.

    None when the reuse side recorded no time.
    """
    periodic_max = max(periodic_operations.values(), default=0.0)
    reuse_max = max(reuse_operations.values(), default=0.0)
    if reuse_max <= 0:
        return None
    return periodic_max / reuse_max
