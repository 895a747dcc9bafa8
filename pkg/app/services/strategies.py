"""The four model-maintenance strategies and the model registry they share.

Every strategy scores the same windows 1..n-1, so their per-window MSE
lists line up for the statistical comparison.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Any, Dict, List, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, InstanceOf, computed_field

from app.errors import RegistryMiss, TooFewWindows
from app.models import RegisteredModel, WindowAssignment
from app.schemas import ES_VARIANT, ForecasterName, LearnerSpec, MetricName, SimilarityThreshold, StrategyName
from app.services.evaluation import CostLedger, mse
from app.services.learners import TrainedModel, fit, from_payload, predict, to_payload
from app.services.similarity import (DEFAULT_TVD_BINS, SimilarityEntry, SimilarityMap, decide_reuse,
                                     resolve_root)
from app.services.windowing import Window, window_index_for_offset
from app.utils.database import get_db_session

logger = logging.getLogger(__name__)

DEFAULT_RETENTION = timedelta(days=3 * 365)


def model_id_for(model: TrainedModel) -> str:
    return RegisteredModel.generate_id(model.spec.model_dump_json(), model.trained_on_window)


@dataclass
class ModelRegistry:
    """Models keyed by id, plus the slot each window's model was saved under.

    A reused window aliases the id of the model it reuses instead of storing
    a copy.
    """

    retention: timedelta = DEFAULT_RETENTION
    by_window: Dict[int, str] = field(default_factory=dict)
    models: Dict[str, TrainedModel] = field(default_factory=dict)

    def register(self, window: int, model: TrainedModel) -> str:
        model_id = model_id_for(model)
        self.models[model_id] = model
        self.by_window[window] = model_id
        return model_id

    def alias(self, window: int, model_id: str):
        if model_id not in self.models:
            raise RegistryMiss(f"Cannot alias window {window} to unknown model {model_id}")
        self.by_window[window] = model_id

    def model_id_at(self, window: int) -> str:
        model_id = self.by_window.get(window)
        if model_id is None or model_id not in self.models:
            raise RegistryMiss(f"No stored model for window {window}")
        return model_id

    def model_at(self, window: int) -> TrainedModel:
        return self.models[self.model_id_at(window)]

    def prune(self, now: Optional[datetime] = None) -> int:
        return prune_registry(self, now or datetime.now(timezone.utc))

    def save(self, run_label: str, now: Optional[datetime] = None) -> int:
        """Prune, then replace the stored copy of this run's registry."""
        self.prune(now)
        with get_db_session() as session:
            session.query(WindowAssignment).filter(WindowAssignment.run_label == run_label).delete()
            session.query(RegisteredModel).filter(RegisteredModel.run_label == run_label).delete()
            for model_id, model in self.models.items():
                session.add(RegisteredModel(
                    run_label=run_label,
                    model_id=model_id,
                    learner_kind=model.spec.kind,
                    trained_on_window=model.trained_on_window,
                    trained_at=model.trained_at,
                    train_time_seconds=model.train_time_seconds,
                    payload=to_payload(model),
                ))
            for window, model_id in sorted(self.by_window.items()):
                session.add(WindowAssignment(run_label=run_label, window_index=window, model_id=model_id))
        logger.info(f"Saved registry '{run_label}': {len(self.models)} models, {len(self.by_window)} windows")
        return len(self.models)

    @classmethod
    def load(cls, run_label: str, retention: timedelta = DEFAULT_RETENTION) -> "ModelRegistry":
        registry = cls(retention=retention)
        with get_db_session() as session:
            for row in session.query(RegisteredModel).filter(RegisteredModel.run_label == run_label):
                registry.models[row.model_id] = from_payload(row.payload)
            for row in session.query(WindowAssignment).filter(WindowAssignment.run_label == run_label):
                registry.by_window[row.window_index] = row.model_id
        logger.debug(f"Loaded registry '{run_label}': {len(registry.models)} models")
        return registry


def prune_registry(registry: ModelRegistry, now: datetime) -> int:
    """Drop models trained longer ago than the retention, with their window slots."""
    cutoff = now - registry.retention
    expired = {model_id for model_id, model in registry.models.items() if model.trained_at < cutoff}
    for model_id in expired:
        del registry.models[model_id]
    for window in [w for w, model_id in registry.by_window.items() if model_id in expired]:
        del registry.by_window[window]
    if expired:
        logger.info(f"Pruned {len(expired)} model(s) older than {registry.retention.days} days")
    return len(expired)


class WindowRecord(BaseModel):
    window: int
    mse: float
    provenance: Literal["new", "reused", "random"]
    source_window: Optional[int] = None
    model_id: Optional[str] = None
    alg_window_index: Optional[int] = None
    distance: Optional[float] = None
    train_seconds: float = Field(default=0.0, exclude=True)
    predict_seconds: float = Field(default=0.0, exclude=True)


class StrategyReport(BaseModel):
    """Outcome of one strategy run; timings are kept out of the main payload."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    strategy: StrategyName
    dataset: str = "dataset"
    learner: Optional[str] = None
    window_days: Optional[int] = None
    forecaster: Optional[ForecasterName] = None
    metric: Optional[MetricName] = None
    threshold: Optional[str] = None
    es_variant: Optional[str] = None
    records: List[WindowRecord]
    ledger: InstanceOf[CostLedger] = Field(default_factory=CostLedger, exclude=True)
    similarity_map: Optional[InstanceOf[SimilarityMap]] = Field(default=None, exclude=True)

    @property
    def label(self) -> str:
        if self.strategy == "reuse" and self.forecaster:
            return f"reuse[{self.forecaster}/{self.metric}]"
        return self.strategy

    @property
    def window_indices(self) -> List[int]:
        return [r.window for r in self.records]

    @property
    def window_mses(self) -> List[float]:
        return [r.mse for r in self.records]

    @computed_field
    @property
    def aggregate_mse(self) -> float:
        return float(np.mean(self.window_mses))

    @computed_field
    @property
    def reuse_only_mse(self) -> Optional[float]:
        reused = [r.mse for r in self.records if r.provenance == "reused"]
        return float(np.mean(reused)) if reused else None

    @computed_field
    @property
    def reduced_training_count(self) -> int:
        return sum(1 for r in self.records if r.provenance == "reused")

    @computed_field
    @property
    def fit_count(self) -> int:
        return sum(1 for r in self.records if r.provenance == "new")

    @property
    def run_seconds(self) -> float:
        return sum(r.train_seconds + r.predict_seconds for r in self.records)

    def timings(self) -> Dict[str, Any]:
        return {
            "hourly_rate": self.ledger.hourly_rate,
            "ledger": self.ledger.summary(),
            "run_seconds": self.run_seconds,
            "windows": [
                {"window": r.window, "train_seconds": r.train_seconds, "predict_seconds": r.predict_seconds}
                for r in self.records
            ],
        }

    def to_dict(self) -> Dict[str, Any]:
        payload = self.model_dump(mode="json")
        payload["timings"] = self.timings()
        return payload

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _require_windows(windows: Sequence[Window]):
    if len(windows) < 2:
        raise TooFewWindows(f"A strategy run needs at least 2 windows, got {len(windows)}")


def _score(model: TrainedModel, window: Window, ledger: CostLedger):
    started = time.perf_counter()
    y_hat = predict(model, window.X)
    elapsed = ledger.record("prediction", time.perf_counter() - started)
    return mse(window.y, y_hat), elapsed


def _fit_on(spec: LearnerSpec, window: Window, ledger: CostLedger) -> TrainedModel:
    model = fit(spec, window.X, window.y, trained_on_window=window.index)
    ledger.record("training", model.train_time_seconds)
    return model


def _finish(report: StrategyReport) -> StrategyReport:
    logger.info(
        f"{report.label} on '{report.dataset}': {len(report.records)} windows scored, "
        f"{report.fit_count} fits, {report.reduced_training_count} reused, MSE {report.aggregate_mse:.6g}"
    )
    return report


def _dataset_name(windows: Sequence[Window]) -> str:
    return windows[0].data.name


def run_stationary(windows: Sequence[Window], spec: LearnerSpec, ledger: Optional[CostLedger] = None) -> StrategyReport:
    """Train once on window 0 and never update."""
    _require_windows(windows)
    ledger = ledger if ledger is not None else CostLedger()
    model = _fit_on(spec, windows[0], ledger)
    model_id = model_id_for(model)

    records = []
    for t in range(1, len(windows)):
        score, predict_seconds = _score(model, windows[t], ledger)
        records.append(WindowRecord(
            window=t,
            mse=score,
            provenance="new" if t == 1 else "reused",
            source_window=0,
            model_id=model_id,
            train_seconds=model.train_time_seconds if t == 1 else 0.0,
            predict_seconds=predict_seconds,
        ))
    return _finish(StrategyReport(
        strategy="stationary",
        dataset=_dataset_name(windows),
        learner=spec.short_name,
        window_days=windows[0].length_days,
        records=records,
        ledger=ledger,
    ))


def run_periodic(windows: Sequence[Window], spec: LearnerSpec, ledger: Optional[CostLedger] = None) -> StrategyReport:
    """Retrain on the most recent window before scoring each new one."""
    _require_windows(windows)
    ledger = ledger if ledger is not None else CostLedger()
    records = []
    for t in range(1, len(windows)):
        model = _fit_on(spec, windows[t - 1], ledger)
        score, predict_seconds = _score(model, windows[t], ledger)
        records.append(WindowRecord(
            window=t,
            mse=score,
            provenance="new",
            source_window=t - 1,
            model_id=model_id_for(model),
            train_seconds=model.train_time_seconds,
            predict_seconds=predict_seconds,
        ))
    return _finish(StrategyReport(
        strategy="periodic",
        dataset=_dataset_name(windows),
        learner=spec.short_name,
        window_days=windows[0].length_days,
        records=records,
        ledger=ledger,
    ))


def run_random(windows: Sequence[Window], seed: int, ledger: Optional[CostLedger] = None) -> StrategyReport:
    """Uniform guesses within each scored window's own target range."""
    _require_windows(windows)
    ledger = ledger if ledger is not None else CostLedger()
    rng = np.random.default_rng(seed)
    records = []
    for t in range(1, len(windows)):
        y = windows[t].y
        started = time.perf_counter()
        guesses = rng.uniform(y.min(), y.max(), size=y.shape[0])
        elapsed = ledger.record("prediction", time.perf_counter() - started)
        records.append(WindowRecord(window=t, mse=mse(y, guesses), provenance="random", predict_seconds=elapsed))
    return _finish(StrategyReport(
        strategy="random",
        dataset=_dataset_name(windows),
        window_days=windows[0].length_days,
        records=records,
        ledger=ledger,
    ))


def run_model_reuse(
    windows: Sequence[Window],
    spec: LearnerSpec,
    forecaster: ForecasterName,
    metric: MetricName,
    threshold: SimilarityThreshold,
    registry: Optional[ModelRegistry] = None,
    ledger: Optional[CostLedger] = None,
    similarity_map: Optional[SimilarityMap] = None,
    bins: int = DEFAULT_TVD_BINS,
    seasonal_period: Optional[int] = None,
) -> StrategyReport:
    """Serve each window with an earlier window's model when their data look alike.

    The reuse decision is made online from windows 0..t-1 unless a
    precomputed `similarity_map` is given. The model for window t is saved
    under slot t-1: a fresh fit on window t-1, or an alias of the reused
    root's model.
    """
    _require_windows(windows)
    registry = registry if registry is not None else ModelRegistry()
    ledger = ledger if ledger is not None else CostLedger()
    online = similarity_map is None
    working_map = SimilarityMap(forecaster, metric, threshold) if online else similarity_map

    records = []
    for t in range(1, len(windows)):
        distance = None
        if online:
            decision = decide_reuse(
                windows[:t], t, forecaster, metric, threshold, ledger, bins, seasonal_period
            )
            if decision.accepted:
                working_map.add(t, SimilarityEntry(decision.source, decision.distance, metric))
        if t in working_map:
            distance = working_map.entries[t].distance
            root = resolve_root(working_map, t)
            model_id = registry.model_id_at(root)
            registry.alias(t - 1, model_id)
            model = registry.models[model_id]
            provenance, source, train_seconds = "reused", root, 0.0
        else:
            model = _fit_on(spec, windows[t - 1], ledger)
            model_id = registry.register(t - 1, model)
            provenance, source, train_seconds = "new", t - 1, model.train_time_seconds

        score, predict_seconds = _score(model, windows[t], ledger)
        logger.debug(f"Window {t}: {provenance} model from window {source}, MSE {score:.6g}")
        records.append(WindowRecord(
            window=t,
            mse=score,
            provenance=provenance,
            source_window=source,
            model_id=model_id,
            alg_window_index=window_index_for_offset(t * windows[t].size, windows[t].size, forecaster),
            distance=distance,
            train_seconds=train_seconds,
            predict_seconds=predict_seconds,
        ))

    return _finish(StrategyReport(
        strategy="reuse",
        dataset=_dataset_name(windows),
        learner=spec.short_name,
        window_days=windows[0].length_days,
        forecaster=forecaster,
        metric=metric,
        threshold=threshold.label,
        es_variant=ES_VARIANT if forecaster == "ES" else None,
        records=records,
        ledger=ledger,
        similarity_map=working_map,
    ))
