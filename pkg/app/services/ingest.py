"""CSV ingestion, validation, min-max normalization and daily averages."""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from datetime import date
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from sklearn.preprocessing import MinMaxScaler

from app.errors import (EmptyDataset, IrregularSampling, MalformedRow, MissingTarget,
                        UnknownColumn)
from app.schemas import FitScope

logger = logging.getLogger(__name__)

SECONDS_PER_DAY = 86400


@dataclass(frozen=True)
class TimeSeriesDataset:
    """Regularly sampled rows of numeric features plus one target column."""

    timestamps: pd.DatetimeIndex
    features: np.ndarray  # (rows, n_features)
    target: np.ndarray  # (rows,)
    feature_names: Tuple[str, ...]
    target_name: str
    samples_per_day: int
    name: str = "dataset"

    def __post_init__(self):
        self.features.setflags(write=False)
        self.target.setflags(write=False)

    def __len__(self) -> int:
        return int(self.target.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.features.shape[1])

    @property
    def spacing_seconds(self) -> float:
        return SECONDS_PER_DAY / self.samples_per_day

    def column(self, name: str) -> np.ndarray:
        if name == self.target_name:
            return self.target
        if name in self.feature_names:
            return self.features[:, self.feature_names.index(name)]
        raise UnknownColumn(f"Column '{name}' is not in dataset '{self.name}'")

    def slice(self, start: int, stop: int) -> "TimeSeriesDataset":
        return replace(
            self,
            timestamps=self.timestamps[start:stop],
            features=self.features[start:stop],
            target=self.target[start:stop],
        )


@dataclass(frozen=True)
class NormalizationParams:
    """Fitted min-max scaler, feature columns first and the target last."""

    columns: Tuple[str, ...]
    scaler: MinMaxScaler

    @property
    def constant(self) -> np.ndarray:
        return self.scaler.data_range_ == 0

    def transform(self, values: np.ndarray) -> np.ndarray:
        scaled = self.scaler.transform(values)
        # Constant columns map to 0, also past the fit scope
        scaled[:, self.constant] = 0.0
        return scaled

    def inverse(self, values: np.ndarray) -> np.ndarray:
        return self.scaler.inverse_transform(values)


def load_dataset(
    path: str | Path,
    target_name: str,
    samples_per_day: int,
    timestamp_column: str = "timestamp",
    timestamp_format: Optional[str] = None,
    name: Optional[str] = None,
) -> TimeSeriesDataset:
    """Load a CSV time series, sort it and validate its sampling grid.

    A single missing sampling step is repaired by forward-filling the previous
    row; larger gaps, duplicates and unparseable cells are errors.
    """
    if samples_per_day < 1:
        raise ValueError("samples_per_day must be positive")
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Dataset file not found: {path}")

    try:
        frame = pd.read_csv(path, encoding="utf-8", dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise MalformedRow(f"{path}: {e}") from e
    except pd.errors.EmptyDataError as e:
        raise EmptyDataset(f"{path} has no header row") from e

    frame.columns = [c.strip() for c in frame.columns]
    if timestamp_column not in frame.columns:
        raise MalformedRow(f"{path}: timestamp column '{timestamp_column}' not found")
    if target_name not in frame.columns:
        raise MissingTarget(f"{path}: target column '{target_name}' not found")
    if frame.empty:
        raise EmptyDataset(f"{path} has a header but no rows")

    try:
        timestamps = pd.to_datetime(
            frame[timestamp_column].str.strip(),
            format=timestamp_format or "ISO8601",
        )
    except (ValueError, TypeError) as e:
        raise MalformedRow(f"{path}: unparseable timestamp ({e})") from e

    feature_names = tuple(c for c in frame.columns if c not in (timestamp_column, target_name))
    numeric = frame[list(feature_names) + [target_name]].apply(
        lambda col: pd.to_numeric(col.str.strip(), errors="coerce")
    )
    bad = ~np.isfinite(numeric.to_numpy(dtype=float))
    if bad.any():
        row, col = np.argwhere(bad)[0]
        # +2: header line plus 1-based numbering
        raise MalformedRow(
            f"{path}: line {row + 2}, column '{numeric.columns[col]}' "
            f"has unparseable value '{frame.iloc[row][numeric.columns[col]]}'"
        )

    numeric.index = pd.DatetimeIndex(timestamps)
    numeric = numeric.sort_index(kind="stable")
    numeric = _repair_sampling_grid(numeric, samples_per_day, path)

    dataset = TimeSeriesDataset(
        timestamps=pd.DatetimeIndex(numeric.index),
        features=numeric[list(feature_names)].to_numpy(dtype=float).reshape(len(numeric), len(feature_names)),
        target=numeric[target_name].to_numpy(dtype=float),
        feature_names=feature_names,
        target_name=target_name,
        samples_per_day=samples_per_day,
        name=name or path.stem,
    )
    logger.info(
        f"Loaded {path.name}: {len(dataset)} rows, {dataset.n_features} features, {samples_per_day}/day"
    )
    return dataset


def _repair_sampling_grid(frame: pd.DataFrame, samples_per_day: int, path: Path) -> pd.DataFrame:
    step = pd.Timedelta(seconds=SECONDS_PER_DAY / samples_per_day)
    gaps = frame.index.to_series().diff().iloc[1:]
    if gaps.empty:
        return frame

    bad = gaps[(gaps != step) & (gaps != 2 * step)]
    if not bad.empty:
        at = bad.index[0]
        raise IrregularSampling(
            f"{path}: spacing {bad.iloc[0]} before {at} does not match declared {step}"
        )

    missing = gaps[gaps == 2 * step]
    if missing.empty:
        return frame
    logger.warning(f"{path.name}: forward-filling {len(missing)} single missing step(s)")
    full_index = pd.date_range(frame.index[0], frame.index[-1], freq=step)
    return frame.reindex(full_index).ffill()


def normalize_min_max(
    ds: TimeSeriesDataset,
    fit_scope: FitScope = FitScope(),
    clamp: bool = False,
) -> Tuple[TimeSeriesDataset, NormalizationParams]:
    """Scale every feature column and the target to [0, 1].

    min/max are computed over the fit scope rows; with a prefix scope later
    values may leave [0, 1] unless `clamp` is set.
    """
    if len(ds) == 0:
        raise EmptyDataset(f"Dataset '{ds.name}' is empty")

    table = np.column_stack([ds.features, ds.target])
    rows = len(ds) if fit_scope.kind == "full" else min(fit_scope.rows, len(ds))
    params = NormalizationParams(
        columns=ds.feature_names + (ds.target_name,),
        scaler=MinMaxScaler(clip=clamp).fit(table[:rows]),
    )
    scaled = params.transform(table)
    return replace(ds, features=scaled[:, :-1].copy(), target=scaled[:, -1].copy()), params


def denormalize(ds: TimeSeriesDataset, params: NormalizationParams) -> TimeSeriesDataset:
    """Map a normalized dataset (or forecast values dropped into one) back to original units."""
    table = params.inverse(np.column_stack([ds.features, ds.target]))
    return replace(ds, features=table[:, :-1].copy(), target=table[:, -1].copy())


def daily_average(ds: TimeSeriesDataset, column: str) -> List[Tuple[date, float]]:
    """Mean of `column` per calendar day present in the dataset."""
    values = pd.Series(ds.column(column), index=ds.timestamps)
    means = values.groupby(values.index.date).mean()
    return [(day, float(mean)) for day, mean in means.items()]
