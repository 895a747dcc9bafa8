import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.errors import EmptyDataset, IrregularSampling, MalformedRow, MissingTarget, UnknownColumn
from app.schemas import FitScope
from app.services.ingest import daily_average, denormalize, load_dataset, normalize_min_max
from tests.helpers import build_dataset


def write_rows(path, rows, header="timestamp,x0,y"):
    path.write_text("\n".join([header, *rows]) + "\n", encoding="utf-8")
    return path


def hourly_rows(count, start="2021-01-01"):
    stamps = pd.date_range(start, periods=count, freq="h")
    return [f"{ts:%Y-%m-%dT%H:%M:%S},{i},{i * 2}" for i, ts in enumerate(stamps)]


def test_load_dataset_reads_features_and_target(tmp_path):
    path = write_rows(tmp_path / "hourly.csv", hourly_rows(48))
    ds = load_dataset(path, target_name="y", samples_per_day=24)
    assert len(ds) == 48
    assert ds.feature_names == ("x0",)
    assert ds.n_features == 1
    assert ds.name == "hourly"
    assert ds.target[5] == 10.0
    assert ds.spacing_seconds == 3600.0


def test_rows_are_sorted_by_timestamp(tmp_path):
    rows = hourly_rows(24)
    path = write_rows(tmp_path / "shuffled.csv", rows[12:] + rows[:12])
    ds = load_dataset(path, target_name="y", samples_per_day=24)
    assert ds.timestamps.is_monotonic_increasing
    np.testing.assert_array_equal(ds.features[:, 0], np.arange(24))


def test_missing_target_column(tmp_path):
    path = write_rows(tmp_path / "no_target.csv", hourly_rows(4))
    with pytest.raises(MissingTarget):
        load_dataset(path, target_name="price", samples_per_day=24)


def test_unparseable_cell_is_malformed(tmp_path):
    rows = hourly_rows(4)
    rows[2] = rows[2].rsplit(",", 1)[0] + ",abc"
    path = write_rows(tmp_path / "bad_cell.csv", rows)
    with pytest.raises(MalformedRow, match="line 4"):
        load_dataset(path, target_name="y", samples_per_day=24)


def test_missing_timestamp_column_is_malformed(tmp_path):
    path = write_rows(tmp_path / "no_time.csv", ["1,2", "3,4"], header="x0,y")
    with pytest.raises(MalformedRow):
        load_dataset(path, target_name="y", samples_per_day=24)


def test_header_only_file_is_empty(tmp_path):
    path = write_rows(tmp_path / "empty.csv", [])
    with pytest.raises(EmptyDataset):
        load_dataset(path, target_name="y", samples_per_day=24)


def test_single_missing_step_is_forward_filled(tmp_path):
    rows = hourly_rows(6)
    del rows[3]
    path = write_rows(tmp_path / "gap.csv", rows)
    ds = load_dataset(path, target_name="y", samples_per_day=24)
    assert len(ds) == 6
    assert ds.target[3] == ds.target[2] == 4.0


def test_larger_gap_is_irregular(tmp_path):
    rows = hourly_rows(8)
    del rows[3:5]
    path = write_rows(tmp_path / "big_gap.csv", rows)
    with pytest.raises(IrregularSampling):
        load_dataset(path, target_name="y", samples_per_day=24)


def test_duplicate_timestamp_is_irregular(tmp_path):
    rows = hourly_rows(4)
    path = write_rows(tmp_path / "dupe.csv", rows + [rows[-1]])
    with pytest.raises(IrregularSampling):
        load_dataset(path, target_name="y", samples_per_day=24)


def test_wrong_declared_rate_is_irregular(tmp_path):
    path = write_rows(tmp_path / "hourly.csv", hourly_rows(10))
    with pytest.raises(IrregularSampling):
        load_dataset(path, target_name="y", samples_per_day=12)


def test_loading_is_deterministic(tmp_path):
    path = write_rows(tmp_path / "hourly.csv", hourly_rows(30))
    first = load_dataset(path, target_name="y", samples_per_day=24)
    second = load_dataset(path, target_name="y", samples_per_day=24)
    np.testing.assert_array_equal(first.features, second.features)
    np.testing.assert_array_equal(first.target, second.target)
    assert first.timestamps.equals(second.timestamps)


def test_normalize_full_scope_maps_to_unit_interval():
    rng = np.random.default_rng(0)
    ds = build_dataset(rng.normal(size=200) * 10 + 3, rng.uniform(-5, 5, size=(200, 3)))
    scaled, params = normalize_min_max(ds)
    table = np.column_stack([scaled.features, scaled.target])
    assert table.min() == 0.0
    assert table.max() == pytest.approx(1.0, abs=1e-12)
    assert params.columns == ("x0", "x1", "x2", "y")


def test_normalize_matches_worked_example():
    scaled, params = normalize_min_max(build_dataset([2.0, 4.0, 6.0]))
    np.testing.assert_allclose(scaled.target, [0.0, 0.5, 1.0], atol=1e-12)
    np.testing.assert_array_equal(params.scaler.data_min_, [2.0, 2.0])
    np.testing.assert_array_equal(params.scaler.data_max_, [6.0, 6.0])


def test_constant_column_maps_to_zero():
    ds = build_dataset(np.linspace(0, 1, 10), np.column_stack([np.full(10, 7.0), np.arange(10.0)]))
    scaled, _ = normalize_min_max(ds)
    np.testing.assert_array_equal(scaled.features[:, 0], np.zeros(10))


def test_column_constant_in_prefix_maps_to_zero_everywhere():
    ds = build_dataset([5.0, 5.0, 5.0, 8.0, 1.0])
    scaled, params = normalize_min_max(ds, FitScope(kind="prefix", rows=3))
    np.testing.assert_array_equal(scaled.target, np.zeros(5))
    assert params.constant.tolist() == [True, True]


def test_prefix_scope_can_leave_unit_interval_unless_clamped():
    ds = build_dataset([0.0, 10.0, 20.0])
    scaled, _ = normalize_min_max(ds, FitScope(kind="prefix", rows=2))
    np.testing.assert_allclose(scaled.target, [0.0, 1.0, 2.0], atol=1e-12)
    clamped, params = normalize_min_max(ds, FitScope(kind="prefix", rows=2), clamp=True)
    assert clamped.target.max() == 1.0
    assert params.scaler.clip
    np.testing.assert_allclose(denormalize(scaled, params).target, [0.0, 10.0, 20.0], atol=1e-9)


def test_fit_scope_parsing():
    assert FitScope.parse("full").kind == "full"
    assert FitScope.parse("prefix:100").rows == 100
    with pytest.raises(ValueError):
        FitScope.parse("middle")


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(min_value=-1e4, max_value=1e4, allow_nan=False), min_size=2, max_size=40))
def test_denormalize_inverts_normalize(values):
    ds = build_dataset(values)
    scaled, params = normalize_min_max(ds)
    restored = denormalize(scaled, params)
    span = max(values) - min(values)
    if span == 0:
        return
    np.testing.assert_allclose(restored.target, ds.target, rtol=0, atol=1e-9 * max(1.0, span))


def test_daily_average():
    ds = build_dataset([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0], samples_per_day=4)
    assert [mean for _, mean in daily_average(ds, "y")] == [2.5, 6.5]


def test_daily_average_single_day():
    ds = build_dataset([4.0, 4.0, 4.0, 4.0], samples_per_day=4)
    assert [mean for _, mean in daily_average(ds, "y")] == [4.0]


def test_unknown_column():
    with pytest.raises(UnknownColumn):
        build_dataset([1.0, 2.0]).column("price")
