"""CSV/JSON writers for every table the CLI emits.

All tables are written with a header row and rows in a fixed order.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from app.services.evaluation import ComparisonResult, financial_cost
from app.services.ingest import TimeSeriesDataset, daily_average
from app.services.strategies import StrategyReport
from app.services.windowing import SegmentLengthReport, Window

logger = logging.getLogger(__name__)

FIVE_NUMBER_COLUMNS = ["minimum", "q1", "median", "q3", "maximum"]


def write_csv(rows: Iterable[Mapping[str, Any]], path: Path, columns: Sequence[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(list(rows), columns=list(columns)).to_csv(path, index=False)
    logger.debug(f"Wrote {path}")
    return path


def write_json(payload: Any, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    logger.debug(f"Wrote {path}")
    return path


def five_number_summary(values) -> Dict[str, float]:
    quantiles = np.percentile(np.asarray(values, dtype=float), [0, 25, 50, 75, 100])
    return dict(zip(FIVE_NUMBER_COLUMNS, (float(q) for q in quantiles)))


# Distribution analysis

def daily_average_rows(ds: TimeSeriesDataset, column: Optional[str] = None) -> List[Dict[str, Any]]:
    return [{"date": day.isoformat(), "mean": mean} for day, mean in daily_average(ds, column or ds.target_name)]


def window_summary_rows(windows: Sequence[Window]) -> List[Dict[str, Any]]:
    return [
        {"window": w.index, "start": w.start.isoformat(), **five_number_summary(w.y)}
        for w in windows
    ]


def monthly_summary_rows(ds: TimeSeriesDataset) -> List[Dict[str, Any]]:
    """Five-number summaries of the daily averages, grouped by calendar month."""
    days, means = zip(*daily_average(ds, ds.target_name))
    daily = pd.Series(means, index=pd.DatetimeIndex(days).to_period("M"))
    return [
        {"month": str(month), "days": int(values.size), **five_number_summary(values.to_numpy())}
        for month, values in daily.groupby(level=0)
    ]


def window_histogram_rows(windows: Sequence[Window], bins: int = 20) -> List[Dict[str, Any]]:
    """Per-window counts over one shared set of bin edges."""
    pooled = np.concatenate([w.y for w in windows])
    low, high = float(pooled.min()), float(pooled.max())
    if low == high:
        high = low + 1.0
    edges = np.linspace(low, high, bins + 1)
    rows = []
    for w in windows:
        counts, _ = np.histogram(w.y, bins=edges)
        rows.extend(
            {"window": w.index, "bin_left": float(edges[i]), "bin_right": float(edges[i + 1]), "count": int(c)}
            for i, c in enumerate(counts)
        )
    return rows


# Segment-length search (algorithm, approach, dataset, minimum MSE, segment length)

def segment_length_rows(report: SegmentLengthReport) -> List[Dict[str, Any]]:
    return [{
        "algorithm": report.algorithm,
        "approach": report.approach,
        "dataset": report.dataset,
        "minimum_mse": report.minimum_mse,
        "segment_length": report.chosen,
    }]


def segment_candidate_rows(report: SegmentLengthReport) -> List[Dict[str, Any]]:
    return [
        {
            "segment_length": length,
            "mse": report.per_candidate_mse.get(length),
            "cv_mse": report.per_candidate_cv_mse.get(length),
            "skipped": length in report.skipped,
        }
        for length in report.candidates
    ]


# Strategy results

def window_record_rows(report: StrategyReport) -> List[Dict[str, Any]]:
    return [
        {
            "window": r.window,
            "alg_window_index": r.alg_window_index,
            "provenance": r.provenance,
            "source_window": r.source_window,
            "model_id": r.model_id,
            "distance": r.distance,
            "mse": r.mse,
            "train_seconds": r.train_seconds,
            "predict_seconds": r.predict_seconds,
        }
        for r in report.records
    ]


def ledger_rows(report: StrategyReport) -> List[Dict[str, Any]]:
    return [
        {"category": category, "seconds": values["seconds"], "cost": values["cost"]}
        for category, values in report.ledger.summary().items()
    ]


def mse_on_windows(report: StrategyReport, windows: Iterable[int]) -> Optional[float]:
    by_window = {r.window: r.mse for r in report.records}
    scores = [by_window[w] for w in windows if w in by_window]
    return float(np.mean(scores)) if scores else None


def mse_table_rows(reports: Sequence[StrategyReport], periodic: Optional[StrategyReport] = None) -> List[Dict[str, Any]]:
    """One row per strategy run; reuse rows also carry periodic MSE on the reused windows."""
    rows = []
    for report in reports:
        reused = [r.window for r in report.records if r.provenance == "reused"]
        rows.append({
            "dataset": report.dataset,
            "algorithm": report.learner or "",
            "strategy": report.label,
            "forecaster": report.forecaster or "",
            "metric": report.metric or "",
            "threshold": report.threshold or "",
            "windows": len(report.records),
            "mse": report.aggregate_mse,
            "reuse_only_mse": report.reuse_only_mse if report.strategy == "reuse" else None,
            "periodic_mse_on_reused": (
                mse_on_windows(periodic, reused) if periodic is not None and report.strategy == "reuse" else None
            ),
        })
    return rows


def comparison_rows(results: Sequence[ComparisonResult], dataset: str, algorithm: str) -> List[Dict[str, Any]]:
    return [
        {
            "dataset": dataset,
            "algorithm": algorithm,
            "strategy_a": r.strategy_a,
            "strategy_b": r.strategy_b,
            "granularity": r.granularity,
            "n_a": r.n_a,
            "n_b": r.n_b,
            "mean_a": r.mean_a,
            "mean_b": r.mean_b,
            "u": r.u,
            "p_value": r.p_value,
            "significant": r.significant,
        }
        for r in results
    ]


# Cost tables

def strategy_cost_rows(
    reports: Sequence[StrategyReport],
    hourly_rate: float,
    segment_report: Optional[SegmentLengthReport] = None,
) -> List[Dict[str, Any]]:
    """Operation time and cost per strategy, one row per operation."""
    rows = []
    if segment_report is not None:
        rows.append(_cost_row(segment_report.dataset, segment_report.algorithm, "periodic",
                              "segment_length_search", segment_report.search_seconds, hourly_rate))
    for report in reports:
        totals = report.ledger.totals()
        operations = [("training", totals["training"]), ("prediction", totals["prediction"])]
        if report.strategy == "reuse":
            operations += [("forecasting", totals["forecasting"]), ("similarity", totals["similarity"])]
        for operation, seconds in operations:
            rows.append(_cost_row(report.dataset, report.learner or "", report.label, operation, seconds, hourly_rate))
    return rows


def _cost_row(dataset: str, algorithm: str, strategy: str, operation: str, seconds: float, rate: float):
    return {
        "dataset": dataset,
        "algorithm": algorithm,
        "strategy": strategy,
        "operation": operation,
        "seconds": seconds,
        "cost": financial_cost(seconds, rate),
    }


def reuse_cost_rows(reports: Sequence[StrategyReport], hourly_rate: float) -> List[Dict[str, Any]]:
    """Reuse runs in the reduced-training / forecasting / similarity / run-time layout."""
    rows = []
    for report in reports:
        totals = report.ledger.totals()
        run_seconds = report.run_seconds
        rows.append({
            "dataset": report.dataset,
            "algorithm": report.learner,
            "metric": report.metric,
            "forecaster": report.forecaster,
            "reduced_training_count": report.reduced_training_count,
            "forecasting_seconds": totals["forecasting"],
            "forecasting_cost": financial_cost(totals["forecasting"], hourly_rate),
            "similarity_seconds": totals["similarity"],
            "similarity_cost": financial_cost(totals["similarity"], hourly_rate),
            "reuse_sa_seconds": run_seconds if report.forecaster == "SA" else None,
            "reuse_sa_cost": financial_cost(run_seconds, hourly_rate) if report.forecaster == "SA" else None,
            "reuse_es_seconds": run_seconds if report.forecaster == "ES" else None,
            "reuse_es_cost": financial_cost(run_seconds, hourly_rate) if report.forecaster == "ES" else None,
        })
    return rows


def periodic_operations(periodic: StrategyReport, segment_report: Optional[SegmentLengthReport] = None) -> Dict[str, float]:
    operations = {"retraining": periodic.run_seconds}
    if segment_report is not None:
        operations["segment_length_search"] = segment_report.search_seconds
    return operations


def reuse_operations(reuse_reports: Sequence[StrategyReport]) -> Dict[str, float]:
    operations: Dict[str, float] = {}
    for report in reuse_reports:
        totals = report.ledger.totals()
        for name, seconds in (
            ("forecasting", totals["forecasting"]),
            ("similarity", totals["similarity"]),
            ("reuse_run", report.run_seconds),
        ):
            key = f"{report.label}:{name}"
            operations[key] = seconds
    return operations
