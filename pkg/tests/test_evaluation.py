import itertools
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.errors import EmptyInput, EmptySample, LengthMismatch, MisalignedReports, NegativeDuration
from app.schemas import LearnerSpec, SimilarityThreshold
from app.services.evaluation import (ComparisonResult, CostLedger, compare_samples, compare_strategies,
                                     financial_cost, mann_whitney_u, mse, operation_time_ratio)
from app.services.strategies import StrategyReport, WindowRecord, run_model_reuse, run_periodic, run_random
from app.services.windowing import segment
from tests.helpers import build_dataset


def test_mse_examples():
    assert mse([1, 2, 3], [1, 2, 3]) == 0.0
    assert mse([0, 0], [1, 1]) == 1.0
    assert mse([0, 0, 0, 0], [1, -1, 2, -2]) == 2.5


def test_mse_errors():
    with pytest.raises(LengthMismatch):
        mse([1, 2], [1])
    with pytest.raises(EmptyInput):
        mse([], [])


def exact_two_sided_p(n, m, u):
    """P-value from the full permutation distribution of U (no ties)."""
    offset = n * (n + 1) // 2
    counts = Counter(sum(ranks) - offset for ranks in itertools.combinations(range(1, n + m + 1), n))
    total = math.comb(n + m, n)
    lower = sum(c for value, c in counts.items() if value <= u) / total
    upper = sum(c for value, c in counts.items() if value >= u) / total
    return min(1.0, 2 * min(lower, upper))


def test_mann_whitney_hand_computed():
    assert mann_whitney_u([1, 2], [3, 4]) == (0.0, pytest.approx(1 / 3))


def test_mann_whitney_identical_samples():
    _, p = mann_whitney_u([0.2, 0.2, 0.2], [0.2, 0.2])
    assert p >= 0.99


def test_mann_whitney_separated_samples():
    _, p = mann_whitney_u(range(1, 9), range(101, 109))
    assert p < 0.05


@pytest.mark.parametrize("n", range(1, 9))
@pytest.mark.parametrize("m", range(1, 9))
def test_mann_whitney_matches_exact_enumeration(n, m):
    values = np.random.default_rng(n * 10 + m).permutation(n + m).astype(float)
    a, b = values[:n], values[n:]
    u, p = mann_whitney_u(a, b)
    expected_u = sum(1.0 for x in a for y in b if x > y)
    assert u == expected_u
    assert p == pytest.approx(exact_two_sided_p(n, m, int(expected_u)), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.integers(min_value=0, max_value=20), min_size=1, max_size=15),
    st.lists(st.integers(min_value=0, max_value=20), min_size=1, max_size=15),
)
def test_mann_whitney_is_symmetric(a, b):
    u_ab, p_ab = mann_whitney_u(a, b)
    u_ba, p_ba = mann_whitney_u(b, a)
    assert u_ab + u_ba == pytest.approx(len(a) * len(b))
    assert p_ab == pytest.approx(p_ba, abs=1e-12)
    assert 0.0 <= p_ab <= 1.0


def test_mann_whitney_empty_sample():
    with pytest.raises(EmptySample):
        mann_whitney_u([], [1.0])


def test_financial_cost():
    assert financial_cost(3600) == pytest.approx(0.115)
    assert financial_cost(60, hourly_rate=6.0) == pytest.approx(0.1)
    assert financial_cost(0) == 0.0
    assert financial_cost(1800) + financial_cost(1800) == pytest.approx(financial_cost(3600))
    with pytest.raises(NegativeDuration):
        financial_cost(-1)


def test_ledger_totals_and_costs():
    ledger = CostLedger(hourly_rate=1.0)
    ledger.record("training", 1800)
    ledger.record("training", 1800)
    ledger.record("similarity", 36)
    assert ledger.totals() == {"training": 3600, "prediction": 0.0, "forecasting": 0.0, "similarity": 36}
    assert ledger.count("training") == 2
    assert ledger.total_seconds == 3636
    assert ledger.cost("training") == pytest.approx(1.0)
    assert ledger.cost() == pytest.approx(1.01)
    assert ledger.summary()["total"]["seconds"] == 3636


def test_ledger_rejects_bad_entries():
    ledger = CostLedger()
    with pytest.raises(NegativeDuration):
        ledger.record("training", -0.5)
    with pytest.raises(ValueError):
        ledger.record("sleeping", 1.0)


def test_ledger_timer_and_merge():
    ledger = CostLedger()
    with ledger.timer("forecasting"):
        sum(range(1000))
    other = CostLedger()
    other.record("prediction", 2.0)
    ledger.merge(other)
    assert ledger.count("forecasting") == 1
    assert ledger.totals()["forecasting"] >= 0.0
    assert ledger.totals()["prediction"] == 2.0


def report_with(strategy, mses, windows=None):
    windows = windows or list(range(1, len(mses) + 1))
    return StrategyReport(
        strategy=strategy,
        records=[WindowRecord(window=w, mse=v, provenance="new") for w, v in zip(windows, mses)],
    )


def test_compare_strategies_pairs_in_input_order():
    reports = [report_with("stationary", [1, 2, 3]), report_with("periodic", [1, 2, 3]),
               report_with("random", [10, 20, 30])]
    results = compare_strategies(reports)
    assert [r.pair for r in results] == [("stationary", "periodic"), ("stationary", "random"),
                                         ("periodic", "random")]
    assert not results[0].significant
    assert results[0].granularity == "per_window"


def test_compare_strategies_requires_aligned_windows():
    with pytest.raises(MisalignedReports):
        compare_strategies([report_with("periodic", [1, 2]), report_with("random", [1, 2], windows=[2, 3])])
    with pytest.raises(MisalignedReports):
        compare_strategies([report_with("periodic", [1, 2])])


def test_strategy_compared_with_itself_is_insignificant(noisy_windows, small_learner):
    periodic = run_periodic(noisy_windows, small_learner)
    (result,) = compare_strategies([periodic, periodic])
    assert result.p_value >= 0.99
    assert not result.significant


def test_learning_beats_random_guessing():
    rng = np.random.default_rng(5)
    features = rng.uniform(size=(12 * 48, 1))
    windows = segment(build_dataset(features[:, 0] ** 2, features, samples_per_day=48), 1)
    periodic = run_periodic(windows, LearnerSpec(n_estimators=10, max_depth=8))
    random = run_random(windows, seed=0)
    (result,) = compare_strategies([periodic, random])
    assert result.significant
    assert result.mean_a < result.mean_b


def test_reuse_matches_periodic_on_alternating_regimes(alternating_windows, small_learner):
    periodic = run_periodic(alternating_windows, small_learner)
    reuse = run_model_reuse(alternating_windows, small_learner, "ES", "WD", SimilarityThreshold(),
                            seasonal_period=240)
    (result,) = compare_strategies([periodic, reuse])
    assert result.p_value >= 0.05


def test_comparison_result_validates_significance():
    with pytest.raises(ValueError):
        ComparisonResult(strategy_a="a", strategy_b="b", u=1, p_value=0.01, significant=False,
                         n_a=2, n_b=2, mean_a=0, mean_b=1)
    with pytest.raises(ValueError):
        ComparisonResult(strategy_a="a", strategy_b="b", u=1, p_value=1.5, significant=False,
                         n_a=2, n_b=2, mean_a=0, mean_b=1)


def test_compare_samples_per_configuration():
    result = compare_samples("reuse", [0.1, 0.2, 0.3, 0.4], "periodic", [0.11, 0.19, 0.31, 0.42])
    assert result.granularity == "per_configuration"
    assert (result.n_a, result.n_b) == (4, 4)
    assert not result.significant


def test_operation_time_ratio():
    assert operation_time_ratio({"retraining": 100.0, "search": 40.0}, {"forecasting": 5.0, "reuse": 20.0}) == 5.0
    assert operation_time_ratio({"retraining": 100.0}, {}) is None
    assert operation_time_ratio({"retraining": 100.0}, {"reuse": 0.0}) is None
