"""Forecast the target distribution of the next, unseen window.

Two forecasters are supported: SA (the next window looks like the previous
one) and ES (additive Holt-Winters fitted on all prior windows).
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import List, Literal, Optional, Sequence

import numpy as np

from app.errors import HistoryTooShort, NoPriorWindow
from app.schemas import ESParams
from app.services.evaluation import mse

logger = logging.getLogger(__name__)

ALPHA_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)
BETA_GAMMA_GRID = (0.0, 0.1, 0.3, 0.5, 0.7, 0.9)

# Lexicographic (alpha, beta, gamma) order; argmin over it breaks ties low
_PARAM_GRID = np.array(list(itertools.product(ALPHA_GRID, BETA_GAMMA_GRID, BETA_GAMMA_GRID)))


@dataclass(frozen=True)
class ForecastDistribution:
    values: np.ndarray
    method: Literal["SA", "ES"]
    for_window: int
    params: Optional[ESParams] = None

    def clamped(self) -> "ForecastDistribution":
        """Values clipped to [0, 1], the range of the normalized target."""
        return ForecastDistribution(np.clip(self.values, 0.0, 1.0), self.method, self.for_window, self.params)


def forecast_sa(windows: Sequence, t: int) -> ForecastDistribution:
    if t < 1:
        raise NoPriorWindow(f"Window {t} has no prior window to forecast from")
    if t > len(windows):
        raise ValueError(f"Window {t} is beyond the next unseen window ({len(windows)})")
    return ForecastDistribution(values=windows[t - 1].y.copy(), method="SA", for_window=t)


def _holt_winters(y: np.ndarray, alpha, beta, gamma, seasonal_period: int, seasonal: bool):
    """Run the additive recursion for K parameter rows at once.

    alpha/beta/gamma are arrays of shape (K,). Returns the one-step squared
    error summed over the scored range and the final (level, trend, seasonals).
    Components whose smoothing parameter is 0 stay switched off.
    """
    n = y.shape[0]
    m = seasonal_period
    k = alpha.shape[0]
    trend_on = beta > 0
    season_on = (gamma > 0) & seasonal

    seasonals = np.zeros((k, m))
    if seasonal:
        base_level = y[:m].mean()
        level = np.where(season_on, base_level, y[0])
        seasonals[season_on] = y[:m] - base_level
        initial_trend = (y[m:2 * m].mean() - base_level) / m if n >= 2 * m else 0.0
        start = m
    else:
        level = np.full(k, y[0])
        initial_trend = 0.0
        start = 1
    fallback_trend = y[1] - y[0]
    trend = np.where(trend_on, np.where(season_on, initial_trend, fallback_trend), 0.0)

    sse = np.zeros(k)
    # Rows without a seasonal component already run during the first season;
    # only t >= start is scored so every row is compared on the same range.
    warmup_active = ~season_on
    all_active = np.ones(k, dtype=bool)
    for t in range(1, n):
        slot = t % m
        season = seasonals[:, slot]
        error = y[t] - (level + trend + season)
        if t >= start:
            sse += error * error
        active = all_active if t >= start else warmup_active
        new_level = alpha * (y[t] - season) + (1 - alpha) * (level + trend)
        new_trend = np.where(trend_on, beta * (new_level - level) + (1 - beta) * trend, 0.0)
        new_season = np.where(season_on, gamma * (y[t] - new_level) + (1 - gamma) * season, season)
        level = np.where(active, new_level, level)
        trend = np.where(active, new_trend, trend)
        seasonals[:, slot] = np.where(active, new_season, season)
    return sse, level, trend, seasonals


def _check_history(history) -> np.ndarray:
    history = np.asarray(history, dtype=float).ravel()
    if history.shape[0] < 2:
        raise HistoryTooShort(f"Exponential smoothing needs at least 2 values, got {history.shape[0]}")
    return history


def fit_es(history, seasonal_period: int) -> ESParams:
    """Grid-search (alpha, beta, gamma) on one-step-ahead in-sample error.

    The seasonal component is available once the history covers a full
    season. Near-equal errors break toward the smaller parameters.
    """
    y = _check_history(history)
    if seasonal_period < 1:
        raise ValueError("seasonal_period must be positive")
    seasonal = seasonal_period <= y.shape[0]
    grid = _PARAM_GRID if seasonal else _PARAM_GRID[_PARAM_GRID[:, 2] == 0]

    sse, *_ = _holt_winters(y, grid[:, 0], grid[:, 1], grid[:, 2], seasonal_period, seasonal)
    best = float(sse.min())
    chosen = int(np.flatnonzero(sse <= best + 1e-12 + 1e-9 * best)[0])
    alpha, beta, gamma = grid[chosen]
    return ESParams(alpha=alpha, beta=beta, gamma=gamma, seasonal_period=seasonal_period)


def forecast_es(history, params: ESParams, horizon: int, for_window: int = -1) -> ForecastDistribution:
    """Forecast `horizon` values: level + h * trend + seasonal[(n + h - 1) mod period]."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    y = _check_history(history)
    m = params.seasonal_period
    seasonal = params.gamma > 0 and m <= y.shape[0]

    _, level, trend, seasonals = _holt_winters(
        y, np.array([params.alpha]), np.array([params.beta]), np.array([params.gamma]), m, seasonal
    )
    n = y.shape[0]
    steps = np.arange(1, horizon + 1)
    values = level[0] + steps * trend[0] + seasonals[0, (n + steps - 1) % m]
    return ForecastDistribution(values=values, method="ES", for_window=for_window, params=params)


def history_before(windows: Sequence, t: int) -> np.ndarray:
    """Target values of windows 0..t-1 concatenated at native frequency."""
    return np.concatenate([w.y for w in windows[:t]])


def forecast_window_es(windows: Sequence, t: int, seasonal_period: int) -> ForecastDistribution:
    if t < 1:
        raise NoPriorWindow(f"Window {t} has no prior window to forecast from")
    history = history_before(windows, t)
    params = fit_es(history, seasonal_period)
    logger.debug(f"ES for window {t}: alpha={params.alpha} beta={params.beta} gamma={params.gamma}")
    return forecast_es(history, params, horizon=windows[0].size, for_window=t)


def es_backtest(history, window_size: int, seasonal_period: int) -> List[float]:
    """MSE of the ES forecast for every held-out window t >= 1."""
    y = np.asarray(history, dtype=float).ravel()
    count = y.shape[0] // window_size if window_size > 0 else 0
    if count < 2:
        raise HistoryTooShort(f"Back-test needs at least 2 windows of {window_size} rows, got {y.shape[0]} rows")

    scores = []
    for t in range(1, count):
        train = y[: t * window_size]
        actual = y[t * window_size:(t + 1) * window_size]
        params = fit_es(train, seasonal_period)
        forecast = forecast_es(train, params, horizon=window_size, for_window=t)
        scores.append(mse(actual, forecast.values))
    return scores
