from typing import List, Literal, Optional, get_args

from pydantic import BaseModel, ConfigDict, Field, model_validator

ForecasterName = Literal["SA", "ES"]
MetricName = Literal["WD", "TVD"]
LearnerKind = Literal["bagged_trees", "boosted_trees"]
StrategyName = Literal["stationary", "periodic", "random", "reuse"]

STRATEGY_NAMES: List[str] = list(get_args(StrategyName))

# Day counts searched when choosing the segment length
DEFAULT_SEGMENT_CANDIDATES: List[int] = [5, 15, 31, 45, 60, 75, 90]

ES_VARIANT = "holt_winters_additive"


class LearnerSpec(BaseModel):
    """Hyperparameters of one tree-ensemble learner."""

    model_config = ConfigDict(frozen=True)

    kind: LearnerKind = "bagged_trees"
    n_estimators: int = Field(default=100, ge=1)
    max_depth: int = Field(default=12, ge=1)
    learning_rate: float = Field(default=0.1, gt=0.0)
    min_samples_leaf: int = Field(default=1, ge=1)
    seed: int = 0

    @model_validator(mode="after")
    def validate_learning_rate(self):
        if self.kind == "boosted_trees" and not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1] for boosted trees")
        return self

    @classmethod
    def defaults(cls, kind: LearnerKind, seed: int = 0) -> "LearnerSpec":
        if kind == "boosted_trees":
            return cls(kind=kind, n_estimators=100, max_depth=3, learning_rate=0.1, min_samples_leaf=1, seed=seed)
        return cls(kind=kind, n_estimators=100, max_depth=12, min_samples_leaf=1, seed=seed)

    @property
    def short_name(self) -> str:
        return "bagged" if self.kind == "bagged_trees" else "boosted"


class ESParams(BaseModel):
    """Additive Holt-Winters smoothing parameters.

    beta = 0 switches the trend component off and gamma = 0 switches the
    seasonal component off, so (alpha, 0, 0) is simple exponential smoothing.
    """

    model_config = ConfigDict(frozen=True)

    alpha: float = Field(gt=0.0, le=1.0)
    beta: float = Field(default=0.0, ge=0.0, le=1.0)
    gamma: float = Field(default=0.0, ge=0.0, le=1.0)
    seasonal_period: int = Field(default=1, ge=1)


class SimilarityThreshold(BaseModel):
    """Acceptance rule for reusing the most similar prior window."""

    model_config = ConfigDict(frozen=True)

    rule: Literal["quantile", "absolute"] = "quantile"
    value: float = 0.25

    @model_validator(mode="after")
    def validate_value(self):
        if self.rule == "quantile" and not 0.0 < self.value < 1.0:
            raise ValueError("quantile threshold must lie in (0, 1)")
        if self.rule == "absolute" and self.value < 0.0:
            raise ValueError("absolute threshold must be >= 0")
        return self

    @property
    def label(self) -> str:
        return f"{self.rule}({self.value:g})"


class FitScope(BaseModel):
    """Rows the min-max scaler is fitted on: all rows, or the first `rows`."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["full", "prefix"] = "full"
    rows: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def validate_rows(self):
        if self.kind == "prefix" and self.rows is None:
            raise ValueError("prefix fit scope needs a row count")
        return self

    @classmethod
    def parse(cls, text: str) -> "FitScope":
        """Accepts `full` or `prefix:<rows>`."""
        text = text.strip().lower()
        if text == "full":
            return cls()
        if text.startswith("prefix:"):
            return cls(kind="prefix", rows=int(text.split(":", 1)[1]))
        raise ValueError(f"Unknown fit scope '{text}' (expected 'full' or 'prefix:<rows>')")

    @property
    def label(self) -> str:
        return "full" if self.kind == "full" else f"prefix:{self.rows}"


def normalize_forecaster(value: str) -> str:
    value = value.strip().upper()
    if value not in ("SA", "ES"):
        raise ValueError(f"Unknown forecaster '{value}' (expected sa or es)")
    return value


def normalize_metric(value: str) -> str:
    value = value.strip().upper()
    aliases = {"W": "WD", "WASSERSTEIN": "WD", "TV": "TVD"}
    value = aliases.get(value, value)
    if value not in ("WD", "TVD"):
        raise ValueError(f"Unknown metric '{value}' (expected wd or tvd)")
    return value

