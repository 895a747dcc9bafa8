"""Fixed-length window segmentation and segment-length selection."""
from __future__ import annotations

import asyncio
import hashlib
import logging
import time
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from app.config import settings
from app.errors import NoViableCandidate, WindowTooLarge
from app.schemas import LearnerSpec
from app.services.evaluation import CostLedger
from app.services.ingest import TimeSeriesDataset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Window:
    """A contiguous, non-overlapping segment; window k starts at row k * size."""

    index: int
    start_row: int
    length_days: int
    data: TimeSeriesDataset

    @property
    def size(self) -> int:
        return len(self.data)

    @property
    def X(self) -> np.ndarray:
        return self.data.features

    @property
    def y(self) -> np.ndarray:
        return self.data.target

    @property
    def start(self):
        return self.data.timestamps[0]

    @cached_property
    def fingerprint(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.y).tobytes()).hexdigest()


class SegmentLengthReport(BaseModel):
    dataset: str
    algorithm: str
    approach: str = "periodic"
    candidates: List[int]
    per_candidate_mse: Dict[int, float]
    per_candidate_cv_mse: Dict[int, float] = Field(default_factory=dict)
    skipped: List[int] = Field(default_factory=list)
    chosen: int
    search_seconds: float = 0.0

    @property
    def minimum_mse(self) -> float:
        return self.per_candidate_mse[self.chosen]


def window_size_rows(ds: TimeSeriesDataset, length_days: int) -> int:
    return length_days * ds.samples_per_day


def segment(ds: TimeSeriesDataset, length_days: int) -> List[Window]:
    """Split the dataset into floor(N / size) full windows; the remainder is dropped."""
    if length_days < 1:
        raise ValueError("length_days must be positive")
    size = window_size_rows(ds, length_days)
    if size > len(ds):
        raise WindowTooLarge(
            f"{length_days}-day windows need {size} rows, dataset '{ds.name}' has {len(ds)}"
        )
    count = len(ds) // size
    windows = [
        Window(index=k, start_row=k * size, length_days=length_days, data=ds.slice(k * size, (k + 1) * size))
        for k in range(count)
    ]
    dropped = len(ds) - count * size
    if dropped:
        logger.debug(f"Dropped {dropped} trailing rows after {count} windows of {length_days} days")
    return windows


def window_index_for_offset(i: int, window_size: int, approach: Literal["SA", "ES"]) -> int:
    """Window index the reuse loop reports for the test window starting at row `i`.

    ES numbers windows from the end of the forecast history, one lower than SA.
    """
    if window_size < 1 or i < window_size or i % window_size:
        raise ValueError(f"offset {i} is not a positive multiple of window size {window_size}")
    index = round(i / window_size)
    return index - 1 if approach == "ES" else index


def select_segment_length(
    ds: TimeSeriesDataset,
    candidates: Sequence[int],
    learner: LearnerSpec,
    ledger: CostLedger,
    cv_folds: Optional[int] = None,
) -> SegmentLengthReport:
    """Run periodic retraining per candidate length and pick the lowest mean MSE.

    Ties go to the smaller length. Candidates that fit fewer than two
    windows are skipped.
    """
    started = time.perf_counter()
    viable = sorted({c for c in candidates if c >= 1 and 2 * window_size_rows(ds, c) <= len(ds)})
    skipped = sorted(set(candidates) - set(viable))
    for c in skipped:
        logger.warning(f"Segment length {c} days fits fewer than 2 windows; skipped")
    if not viable:
        raise NoViableCandidate(f"No candidate in {list(candidates)} fits 2 windows of '{ds.name}'")

    outcomes = asyncio.run(_evaluate_candidates(ds, viable, learner, ledger.hourly_rate, cv_folds))

    per_candidate_mse: Dict[int, float] = {}
    per_candidate_cv: Dict[int, float] = {}
    for length, (mse, cv_mse, run_ledger) in zip(viable, outcomes):
        per_candidate_mse[length] = mse
        if cv_mse is not None:
            per_candidate_cv[length] = cv_mse
        ledger.merge(run_ledger)

    chosen = min(viable, key=lambda c: (per_candidate_mse[c], c))
    logger.info(f"Segment length search on '{ds.name}' chose {chosen} days (MSE {per_candidate_mse[chosen]:.6g})")
    return SegmentLengthReport(
        dataset=ds.name,
        algorithm=learner.short_name,
        candidates=list(candidates),
        per_candidate_mse=per_candidate_mse,
        per_candidate_cv_mse=per_candidate_cv,
        skipped=skipped,
        chosen=chosen,
        search_seconds=time.perf_counter() - started,
    )


async def _evaluate_candidates(ds, lengths, learner, hourly_rate, cv_folds):
    semaphore = asyncio.Semaphore(settings.parallel_workers)

    async def evaluate(length: int):
        async with semaphore:
            return await asyncio.to_thread(_evaluate_candidate, ds, length, learner, hourly_rate, cv_folds)

    return await asyncio.gather(*(evaluate(length) for length in lengths))


def _evaluate_candidate(ds, length, learner, hourly_rate, cv_folds):
    # Imported here: strategies depends on this module for Window
    from app.services.learners import cross_validate
    from app.services.strategies import run_periodic

    run_ledger = CostLedger(hourly_rate=hourly_rate)
    windows = segment(ds, length)
    report = run_periodic(windows, learner, ledger=run_ledger)

    cv_mse = None
    if cv_folds:
        scores = [
            cross_validate(learner, w.X, w.y, k=cv_folds)
            for w in windows[:-1]
            if w.size >= cv_folds
        ]
        cv_mse = float(np.mean(scores)) if scores else None
    logger.debug(f"Candidate {length} days: {len(windows)} windows, periodic MSE {report.aggregate_mse:.6g}")
    return report.aggregate_mse, cv_mse, run_ledger
