import json

import pytest

from app.config import load_config
from app.errors import ConfigurationError


def test_defaults():
    config = load_config()
    assert config.windowing.window_days == 31
    assert config.reuse.forecaster == "ES"
    assert config.reuse.metric == "WD"
    assert config.reuse.threshold.label == "quantile(0.25)"
    assert config.cost.hourly_rate == pytest.approx(0.115)


def test_preset_fills_target_and_rate():
    config = load_config(overrides={"dataset.preset": "nsw_electricity"})
    assert config.dataset.target_name == "nswprice"
    assert config.dataset.samples_per_day == 48


def test_explicit_settings_win_over_preset():
    config = load_config(overrides={"dataset.preset": "weather", "dataset.samples_per_day": 6})
    assert config.dataset.samples_per_day == 6
    assert config.dataset.target_name == "T (degC)"


def test_file_values_and_overrides(tmp_path):
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps({"reuse": {"metric": "tvd", "tvd_bins": 10}, "seed": 4}), encoding="utf-8")
    config = load_config(str(path), {"reuse.forecaster": "sa", "seed": None})
    assert (config.reuse.forecaster, config.reuse.metric, config.reuse.tvd_bins) == ("SA", "TVD", 10)
    assert config.seed == 4
    assert config.seeded_learner().seed == 4


def test_learner_switch_resets_kind_defaults():
    config = load_config(overrides={"learner.kind": "boosted_trees"})
    assert (config.learner.max_depth, config.learner.learning_rate) == (3, 0.1)


def test_auto_window_days_and_fit_scope():
    config = load_config(overrides={"windowing.window_days": "auto", "dataset.fit_scope": "prefix:500"})
    assert config.windowing.window_days == "auto"
    assert config.dataset.fit_scope.rows == 500
    assert load_config(overrides={"windowing.window_days": "15"}).windowing.window_days == 15


@pytest.mark.parametrize(
    "overrides",
    [
        {"reuse.forecaster": "arima"},
        {"reuse.metric": "kl"},
        {"dataset.preset": "unknown"},
        {"windowing.window_days": "0"},
        {"reuse.threshold": {"rule": "quantile", "value": 2}},
    ],
)
def test_invalid_settings_are_configuration_errors(overrides):
    with pytest.raises(ConfigurationError):
        load_config(overrides=overrides)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(str(tmp_path / "absent.json"))


def test_dataset_path_required():
    with pytest.raises(ConfigurationError):
        load_config().dataset_path
