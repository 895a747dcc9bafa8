"""Builders for synthetic datasets shared by the test modules."""
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from app.services.ingest import TimeSeriesDataset

# Two regimes over the same dyadic target levels, rows sorted within a window
LEVELS = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
REGIME_A = np.repeat(LEVELS, [40, 30, 20, 18, 12])
REGIME_B = np.repeat(LEVELS, [12, 18, 20, 30, 40])
ALTERNATING_SAMPLES_PER_DAY = 24
ALTERNATING_WINDOW_DAYS = 5
ALTERNATING_WINDOWS = 12
# One season spans an A window followed by a B window
ALTERNATING_SEASON = 2 * ALTERNATING_WINDOW_DAYS * ALTERNATING_SAMPLES_PER_DAY


def build_dataset(
    target: Sequence[float],
    features: Optional[np.ndarray] = None,
    samples_per_day: int = 24,
    name: str = "synthetic",
    start: str = "2021-01-01",
) -> TimeSeriesDataset:
    target = np.asarray(target, dtype=float)
    if features is None:
        features = target.reshape(-1, 1)
    features = np.asarray(features, dtype=float).reshape(target.shape[0], -1)
    timestamps = pd.date_range(start, periods=target.shape[0], freq=pd.Timedelta(seconds=86400 / samples_per_day))
    return TimeSeriesDataset(
        timestamps=timestamps,
        features=features.copy(),
        target=target.copy(),
        feature_names=tuple(f"x{i}" for i in range(features.shape[1])),
        target_name="y",
        samples_per_day=samples_per_day,
        name=name,
    )


def alternating_target(count: int = ALTERNATING_WINDOWS) -> np.ndarray:
    return np.concatenate([REGIME_A if k % 2 == 0 else REGIME_B for k in range(count)])


def write_dataset_csv(path: Path, ds: TimeSeriesDataset) -> Path:
    frame = pd.DataFrame(ds.features, columns=list(ds.feature_names))
    frame.insert(0, "timestamp", ds.timestamps.strftime("%Y-%m-%dT%H:%M:%S"))
    frame[ds.target_name] = ds.target
    frame.to_csv(path, index=False)
    return path
