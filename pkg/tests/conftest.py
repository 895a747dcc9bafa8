import json
import os
from pathlib import Path

import numpy as np
import pytest

from app.schemas import LearnerSpec
from app.services.windowing import segment
from app.utils.cache_manager import distance_cache
from tests.helpers import (ALTERNATING_SAMPLES_PER_DAY, ALTERNATING_SEASON, ALTERNATING_WINDOW_DAYS,
                           alternating_target, build_dataset, write_dataset_csv)


@pytest.fixture(autouse=True)
def clean_distance_cache():
    distance_cache.clear()
    yield
    distance_cache.clear()


@pytest.fixture
def small_learner():
    return LearnerSpec(kind="bagged_trees", n_estimators=10, max_depth=6, seed=0)


@pytest.fixture
def small_boosted():
    return LearnerSpec(kind="boosted_trees", n_estimators=20, max_depth=3, learning_rate=0.3, seed=0)


@pytest.fixture
def alternating_dataset():
    return build_dataset(alternating_target(), samples_per_day=ALTERNATING_SAMPLES_PER_DAY, name="alternating")


@pytest.fixture
def alternating_windows(alternating_dataset):
    return segment(alternating_dataset, ALTERNATING_WINDOW_DAYS)


@pytest.fixture
def noisy_windows():
    """Tie-free learnable stream: y = sin(2 pi x0) + 0.3 x1 + noise, 6 windows of 2 days."""
    rng = np.random.default_rng(7)
    rows = 6 * 2 * 24
    features = rng.uniform(size=(rows, 2))
    target = np.sin(2 * np.pi * features[:, 0]) + 0.3 * features[:, 1] + rng.normal(scale=0.05, size=rows)
    return segment(build_dataset(target, features, samples_per_day=24, name="noisy"), 2)


@pytest.fixture
def alternating_csv(tmp_path, alternating_dataset):
    return write_dataset_csv(tmp_path / "alternating.csv", alternating_dataset)


@pytest.fixture
def alternating_config(tmp_path, alternating_csv):
    config = {
        "dataset": {"path": str(alternating_csv), "target_name": "y", "samples_per_day": ALTERNATING_SAMPLES_PER_DAY},
        "windowing": {"window_days": ALTERNATING_WINDOW_DAYS},
        "learner": {"kind": "bagged_trees", "n_estimators": 10, "max_depth": 6},
        "reuse": {"forecaster": "ES", "metric": "WD", "seasonal_period": ALTERNATING_SEASON},
        "seed": 0,
        "output_dir": str(tmp_path / "out"),
    }
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    return path


@pytest.fixture
def nsw_csv():
    path = os.getenv("SIMREUSE_NSW_CSV")
    if not path or not Path(path).exists():
        pytest.skip("SIMREUSE_NSW_CSV does not point at the NSW electricity CSV")
    return Path(path)
