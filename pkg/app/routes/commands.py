"""Command handlers behind the CLI: validate, analyze, select-window, run, compare."""
import asyncio
import logging
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel

from app.config import ExperimentConfig, settings
from app.errors import ConfigurationError
from app.schemas import STRATEGY_NAMES, StrategyName
from app.services.evaluation import (CostLedger, compare_samples, compare_strategies,
                                     operation_time_ratio)
from app.services.ingest import TimeSeriesDataset, denormalize, load_dataset, normalize_min_max
from app.services.similarity import build_similarity_map, forecast_window
from app.services.strategies import (ModelRegistry, StrategyReport, run_model_reuse, run_periodic,
                                     run_random, run_stationary)
from app.services.windowing import SegmentLengthReport, Window, segment, select_segment_length
from app.utils import plots, reports
from app.utils.cache_manager import distance_cache
from app.utils.database import default_database_url, init_database

logger = logging.getLogger(__name__)

# "One month" in the segment-length vocabulary
MONTH_DAYS = 31
SWEEP_CONFIGURATIONS: Tuple[Tuple[str, str], ...] = (("WD", "SA"), ("TVD", "SA"), ("WD", "ES"), ("TVD", "ES"))


class ValidationReport(BaseModel):
    dataset: str
    rows: int
    features: int
    samples_per_day: int
    spacing_seconds: float
    start: str
    end: str

    @property
    def summary(self) -> str:
        return f"{self.rows} rows, {self.features} features, {self.samples_per_day}/day"


def load_raw(config: ExperimentConfig) -> TimeSeriesDataset:
    section = config.dataset
    if not section.target_name or not section.samples_per_day:
        raise ConfigurationError("dataset.target_name and dataset.samples_per_day are required (or a dataset.preset)")
    path = config.dataset_path
    if not path.exists():
        raise ConfigurationError(f"Dataset file not found: {path}")
    return load_dataset(
        path,
        target_name=section.target_name,
        samples_per_day=section.samples_per_day,
        timestamp_column=section.timestamp_column,
        timestamp_format=section.timestamp_format,
        name=section.name,
    )


def load_normalized(config: ExperimentConfig) -> TimeSeriesDataset:
    ds, _ = normalize_min_max(load_raw(config), config.dataset.fit_scope, config.dataset.clamp)
    return ds


def output_dir(config: ExperimentConfig) -> Path:
    path = Path(config.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def resolve_windows(config: ExperimentConfig, ds: TimeSeriesDataset) -> Tuple[List[Window], Optional[SegmentLengthReport]]:
    """Segment with the configured length, searching for it first when set to `auto`."""
    segment_report = None
    days = config.windowing.window_days
    if days == "auto":
        search_ledger = CostLedger(hourly_rate=config.cost.hourly_rate)
        segment_report = select_segment_length(
            ds, config.windowing.candidates, config.seeded_learner(), search_ledger, config.windowing.cv_folds
        )
        days = segment_report.chosen
    windows = segment(ds, days)
    logger.info(f"Segmented '{ds.name}' into {len(windows)} windows of {days} days")
    return windows, segment_report


def cmd_validate(config: ExperimentConfig) -> ValidationReport:
    ds = load_raw(config)
    report = ValidationReport(
        dataset=ds.name,
        rows=len(ds),
        features=ds.n_features,
        samples_per_day=ds.samples_per_day,
        spacing_seconds=ds.spacing_seconds,
        start=ds.timestamps[0].isoformat(),
        end=ds.timestamps[-1].isoformat(),
    )
    logger.info(f"{report.dataset}: {report.summary}")
    return report


def cmd_analyze(config: ExperimentConfig, forecasts: bool = False) -> List[Path]:
    """Distribution analysis data and plots for a human to inspect."""
    ds, params = normalize_min_max(load_raw(config), config.dataset.fit_scope, config.dataset.clamp)
    days = config.windowing.window_days if config.windowing.window_days != "auto" else MONTH_DAYS
    windows = segment(ds, days)
    out = output_dir(config)

    daily = reports.daily_average_rows(ds)
    histograms = reports.window_histogram_rows(windows, bins=config.reuse.tvd_bins)
    summaries = reports.window_summary_rows(windows)
    monthly = reports.monthly_summary_rows(ds)
    written = [
        reports.write_csv(daily, out / "daily_average.csv", ["date", "mean"]),
        reports.write_csv(histograms, out / "window_histograms.csv", ["window", "bin_left", "bin_right", "count"]),
        reports.write_csv(summaries, out / "window_summaries.csv", ["window", "start", *reports.FIVE_NUMBER_COLUMNS]),
        reports.write_csv(monthly, out / "monthly_summaries.csv", ["month", "days", *reports.FIVE_NUMBER_COLUMNS]),
        plots.plot_daily_average(daily, out / "daily_average.svg", title=f"{ds.name}: daily average"),
        plots.plot_window_histograms(histograms, out / "window_distributions.svg", title=f"{ds.name}: {days}-day windows"),
        plots.plot_box_summaries(summaries, "window", out / "window_boxplots.svg"),
        plots.plot_box_summaries(monthly, "month", out / "monthly_boxplots.svg"),
    ]
    if forecasts:
        rows = []
        for t in range(1, len(windows)):
            forecast = forecast_window(windows[:t], t, config.reuse.forecaster, config.reuse.seasonal_period)
            original = denormalize(replace(windows[t].data, target=forecast.values.copy()), params).target
            rows.extend(
                {"window": t, "method": forecast.method, "row": i, "value": float(v), "original_value": float(o)}
                for i, (v, o) in enumerate(zip(forecast.values, original))
            )
        written.append(reports.write_csv(rows, out / "forecasts.csv",
                                         ["window", "method", "row", "value", "original_value"]))
    logger.info(f"Analysis of '{ds.name}' wrote {len(written)} files to {out}")
    return written


def cmd_select_window(config: ExperimentConfig) -> SegmentLengthReport:
    ds = load_normalized(config)
    ledger = CostLedger(hourly_rate=config.cost.hourly_rate)
    report = select_segment_length(
        ds, config.windowing.candidates, config.seeded_learner(), ledger, config.windowing.cv_folds
    )
    out = output_dir(config)
    reports.write_csv(reports.segment_length_rows(report), out / "segment_length.csv",
                      ["algorithm", "approach", "dataset", "minimum_mse", "segment_length"])
    reports.write_csv(reports.segment_candidate_rows(report), out / "segment_candidates.csv",
                      ["segment_length", "mse", "cv_mse", "skipped"])
    return report


def run_strategy(
    name: StrategyName,
    windows: List[Window],
    config: ExperimentConfig,
    forecaster: Optional[str] = None,
    metric: Optional[str] = None,
) -> Tuple[StrategyReport, Optional[ModelRegistry]]:
    """Run one strategy with its own ledger (and registry, for reuse)."""
    if name not in STRATEGY_NAMES:
        raise ConfigurationError(f"Unknown strategy '{name}' (expected one of {', '.join(STRATEGY_NAMES)})")
    ledger = CostLedger(hourly_rate=config.cost.hourly_rate)
    learner = config.seeded_learner()
    if name == "stationary":
        return run_stationary(windows, learner, ledger), None
    if name == "periodic":
        return run_periodic(windows, learner, ledger), None
    if name == "random":
        return run_random(windows, config.seed, ledger), None

    reuse = config.reuse
    forecaster = forecaster or reuse.forecaster
    metric = metric or reuse.metric
    similarity_map = None
    if reuse.mode == "precomputed" and len(windows) >= 3:
        similarity_map = build_similarity_map(
            windows, forecaster, metric, reuse.threshold, ledger, reuse.tvd_bins, reuse.seasonal_period
        )
    registry = ModelRegistry()
    report = run_model_reuse(
        windows, learner, forecaster, metric, reuse.threshold,
        registry=registry,
        ledger=ledger,
        similarity_map=similarity_map,
        bins=reuse.tvd_bins,
        seasonal_period=reuse.seasonal_period,
    )
    return report, registry


async def _run_concurrently(jobs, windows, config):
    semaphore = asyncio.Semaphore(settings.parallel_workers)

    async def run(job):
        name, forecaster, metric = job
        async with semaphore:
            return await asyncio.to_thread(run_strategy, name, windows, config, forecaster, metric)

    return await asyncio.gather(*(run(job) for job in jobs))


def _file_stem(report: StrategyReport) -> str:
    if report.strategy == "reuse":
        return f"reuse_{report.forecaster}_{report.metric}".lower()
    return report.strategy


def _save_registry(config: ExperimentConfig, report: StrategyReport, registry: ModelRegistry):
    init_database(default_database_url(config.output_dir))
    registry.save(f"{report.dataset}/{report.label}/{report.learner}/{report.window_days}d")


def _write_strategy_files(out: Path, report: StrategyReport) -> List[Path]:
    stem = _file_stem(report)
    written = [
        reports.write_json(report.to_dict(), out / f"{stem}_report.json"),
        reports.write_csv(reports.window_record_rows(report), out / f"{stem}_windows.csv",
                          ["window", "alg_window_index", "provenance", "source_window", "model_id", "distance",
                           "mse", "train_seconds", "predict_seconds"]),
        reports.write_csv(reports.ledger_rows(report), out / f"{stem}_ledger.csv", ["category", "seconds", "cost"]),
    ]
    if report.similarity_map is not None:
        written.append(reports.write_csv(
            report.similarity_map.rows(report.dataset), out / f"{stem}_similarity_map.csv",
            ["dataset", "metric", "forecaster", "y_window", "x_window", "distance"],
        ))
    return written


def cmd_run(config: ExperimentConfig, strategy: StrategyName) -> StrategyReport:
    if strategy not in STRATEGY_NAMES:
        raise ConfigurationError(f"Unknown strategy '{strategy}' (expected one of {', '.join(STRATEGY_NAMES)})")
    ds = load_normalized(config)
    windows, segment_report = resolve_windows(config, ds)
    report, registry = run_strategy(strategy, windows, config)

    out = output_dir(config)
    _write_strategy_files(out, report)
    if segment_report is not None:
        reports.write_csv(reports.segment_length_rows(segment_report), out / "segment_length.csv",
                          ["algorithm", "approach", "dataset", "minimum_mse", "segment_length"])
    if registry is not None:
        _save_registry(config, report, registry)
    return report


def cmd_compare(config: ExperimentConfig) -> Dict:
    """All four strategies under one config, plus the statistical and cost tables."""
    ds = load_normalized(config)
    windows, segment_report = resolve_windows(config, ds)
    reuse = config.reuse

    reuse_jobs = (
        [("reuse", forecaster, metric) for metric, forecaster in SWEEP_CONFIGURATIONS]
        if reuse.sweep else [("reuse", reuse.forecaster, reuse.metric)]
    )
    jobs = [(name, None, None) for name in STRATEGY_NAMES if name != "reuse"] + reuse_jobs
    outcomes = asyncio.run(_run_concurrently(jobs, windows, config))

    by_name = {report.strategy: report for report, _ in outcomes if report.strategy != "reuse"}
    reuse_reports = [report for report, _ in outcomes if report.strategy == "reuse"]
    configured_reuse = next(
        r for r in reuse_reports if r.forecaster == reuse.forecaster and r.metric == reuse.metric
    )
    periodic = by_name["periodic"]
    baseline = [by_name["stationary"], periodic, by_name["random"], configured_reuse]

    comparisons = compare_strategies(baseline)
    if reuse.sweep:
        for report in reuse_reports:
            if report is not configured_reuse:
                comparisons.extend(compare_strategies([periodic, report]))
        reused_pairs = [
            (r.reuse_only_mse, reports.mse_on_windows(periodic, [w.window for w in r.records if w.provenance == "reused"]))
            for r in reuse_reports
            if r.reuse_only_mse is not None
        ]
        if reused_pairs:
            comparisons.append(compare_samples(
                "reuse (reused windows)", [pair[0] for pair in reused_pairs],
                "periodic (same windows)", [pair[1] for pair in reused_pairs],
                granularity="per_configuration",
            ))

    all_reports = baseline + [r for r in reuse_reports if r is not configured_reuse]
    learner = config.seeded_learner().short_name
    out = output_dir(config)
    reports.write_csv(
        reports.mse_table_rows(all_reports, periodic), out / "mse_table.csv",
        ["dataset", "algorithm", "strategy", "forecaster", "metric", "threshold", "windows", "mse",
         "reuse_only_mse", "periodic_mse_on_reused"],
    )
    reports.write_csv(
        reports.comparison_rows(comparisons, ds.name, learner), out / "mann_whitney.csv",
        ["dataset", "algorithm", "strategy_a", "strategy_b", "granularity", "n_a", "n_b", "mean_a", "mean_b",
         "u", "p_value", "significant"],
    )
    reports.write_csv(
        reports.strategy_cost_rows(all_reports, config.cost.hourly_rate, segment_report), out / "costs.csv",
        ["dataset", "algorithm", "strategy", "operation", "seconds", "cost"],
    )
    reports.write_csv(
        reports.reuse_cost_rows(reuse_reports, config.cost.hourly_rate), out / "reuse_costs.csv",
        ["dataset", "algorithm", "metric", "forecaster", "reduced_training_count", "forecasting_seconds",
         "forecasting_cost", "similarity_seconds", "similarity_cost", "reuse_sa_seconds", "reuse_sa_cost",
         "reuse_es_seconds", "reuse_es_cost"],
    )

    periodic_ops = reports.periodic_operations(periodic, segment_report)
    reuse_ops = reports.reuse_operations(reuse_reports)
    summary = {
        "dataset": ds.name,
        "algorithm": learner,
        "window_days": windows[0].length_days,
        "segment_search": segment_report.model_dump(exclude={"search_seconds"}) if segment_report else None,
        "reports": [r.model_dump(mode="json") for r in all_reports],
        "comparisons": [c.model_dump() for c in comparisons],
        "timings": {
            "operation_time_ratio": operation_time_ratio(periodic_ops, reuse_ops),
            "periodic_operations": periodic_ops,
            "reuse_operations": reuse_ops,
            "reports": {r.label: r.timings() for r in all_reports},
        },
    }
    reports.write_json(summary, out / "compare.json")

    for report, registry in outcomes:
        if registry is not None:
            _save_registry(config, report, registry)
    logger.info(f"Distance cache: {distance_cache.get_cache_stats()}")
    return summary
