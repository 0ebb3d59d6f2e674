"""Window measures over an annotation trace and binary label construction.

Three measures summarize a window of continuous annotation values:
the state (mean level), the change (mean absolute consecutive difference)
and the trend (mean signed consecutive difference). Each measure drives one
binary labeling strategy, thresholded at the median of a reference
population of measure values:

  high_low          state above / below the median, with an exclusion band
                    of half-width epsilon around it (ambiguous windows get
                    no label)
  change_unchanged  change strictly above the median -> "change", else
                    "unchanged"
  up_down           trend strictly above the median -> "uptrend", else
                    "downtrend"
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateInputError

STRATEGY_HIGH_LOW = "high_low"
STRATEGY_CHANGE = "change_unchanged"
STRATEGY_TREND = "up_down"
STRATEGIES = (STRATEGY_HIGH_LOW, STRATEGY_CHANGE, STRATEGY_TREND)

CATEGORIES = {
    STRATEGY_HIGH_LOW: ("low", "high"),
    STRATEGY_CHANGE: ("unchanged", "change"),
    STRATEGY_TREND: ("downtrend", "uptrend"),
}


@dataclass(frozen=True)
class AffectMeasures:
    """The three window measures: state, change and trend."""

    state: float
    change: float
    trend: float


@dataclass(frozen=True)
class LabelThresholds:
    """A strategy's median threshold, plus the exclusion half-width for high_low."""

    strategy: str
    median_value: float
    epsilon: float = 0.0

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(f"unknown strategy {self.strategy!r}")
        if self.epsilon < 0:
            raise ConfigurationError("epsilon must be >= 0")
        if self.epsilon != 0.0 and self.strategy != STRATEGY_HIGH_LOW:
            raise ConfigurationError("epsilon applies to the high_low strategy only")


def _as_trace(values: np.ndarray, min_len: int) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size < min_len:
        raise DegenerateInputError(f"trace must be 1-D with at least {min_len} samples")
    return arr


def affect_state(values: np.ndarray) -> float:
    """Mean of the window's annotation samples."""
    return float(np.mean(_as_trace(values, 1)))


def affect_change(values: np.ndarray) -> float:
    """Mean absolute consecutive difference over the window."""
    arr = _as_trace(values, 2)
    return float(np.mean(np.abs(np.diff(arr))))


def affect_trend(values: np.ndarray) -> float:
    """Mean signed consecutive difference; telescopes to (last - first)/(n-1)."""
    arr = _as_trace(values, 2)
    return float(np.mean(np.diff(arr)))


def window_measures(values: np.ndarray) -> AffectMeasures:
    """All three measures of one annotation window."""
    arr = _as_trace(values, 2)
    return AffectMeasures(
        state=affect_state(arr), change=affect_change(arr), trend=affect_trend(arr)
    )


def compute_threshold(measure_values, strategy: str, epsilon: float = 0.0) -> LabelThresholds:
    """Median of a measure population (even count: mean of the two middle values)."""
    arr = np.asarray(measure_values, dtype=np.float64)
    if arr.size == 0:
        raise DegenerateInputError("cannot take the median of an empty measure list")
    return LabelThresholds(
        strategy=strategy, median_value=float(np.median(arr)), epsilon=epsilon
    )


def assign_label(measures: AffectMeasures, thresholds: LabelThresholds) -> str | None:
    """Binary category under the threshold's strategy, or None when excluded.

    Only the high_low strategy can exclude: windows whose state falls inside
    [median - epsilon, median + epsilon] (boundaries included) get None.
    """
    med = thresholds.median_value
    if thresholds.strategy == STRATEGY_HIGH_LOW:
        if measures.state > med + thresholds.epsilon:
            return "high"
        if measures.state < med - thresholds.epsilon:
            return "low"
        return None
    if thresholds.strategy == STRATEGY_CHANGE:
        return "change" if measures.change > med else "unchanged"
    return "uptrend" if measures.trend > med else "downtrend"


def category_index(strategy: str, category: str) -> int:
    """Stable 0/1 encoding of a strategy's categories for training."""
    try:
        return CATEGORIES[strategy].index(category)
    except (KeyError, ValueError):
        raise ConfigurationError(f"category {category!r} is not legal for {strategy!r}")
