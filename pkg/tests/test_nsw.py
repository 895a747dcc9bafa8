"""Acceptance runs on the NSW electricity data (48 samples a day, target nswprice).

Set SIMREUSE_NSW_CSV to a CSV with a `timestamp` column plus the four numeric
features and nswprice. Run with `pytest -m nsw`.
"""
import pytest

from app.config import load_config
from app.routes.commands import load_normalized, run_strategy
from app.services.evaluation import compare_strategies
from app.services.windowing import segment

pytestmark = pytest.mark.nsw

MONTH_WINDOWS = 31


@pytest.fixture
def nsw_overrides(nsw_csv, tmp_path):
    return {
        "dataset.path": str(nsw_csv),
        "dataset.preset": "nsw_electricity",
        "windowing.window_days": MONTH_WINDOWS,
        "output_dir": str(tmp_path),
    }


@pytest.fixture
def nsw_windows(nsw_overrides):
    return segment(load_normalized(load_config(overrides=nsw_overrides)), MONTH_WINDOWS)


@pytest.mark.parametrize("learner", ["bagged_trees", "boosted_trees"])
def test_baseline_ordering(nsw_overrides, nsw_windows, learner):
    config = load_config(overrides={**nsw_overrides, "learner.kind": learner})
    mse = {
        name: run_strategy(name, nsw_windows, config)[0].aggregate_mse
        for name in ("stationary", "periodic", "random")
    }
    assert mse["periodic"] < mse["stationary"] < mse["random"]


@pytest.mark.parametrize("learner", ["bagged_trees", "boosted_trees"])
def test_reuse_matches_periodic_with_less_training(nsw_overrides, nsw_windows, learner):
    config = load_config(overrides={**nsw_overrides, "learner.kind": learner})
    periodic, _ = run_strategy("periodic", nsw_windows, config)
    reuse, _ = run_strategy("reuse", nsw_windows, config, "ES", "WD")

    (result,) = compare_strategies([periodic, reuse])
    assert result.p_value >= 0.05
    assert reuse.fit_count < periodic.fit_count
    assert reuse.ledger.totals()["training"] <= 0.5 * periodic.ledger.totals()["training"]
