import json
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from app.errors import ConfigurationError
from app.schemas import (DEFAULT_SEGMENT_CANDIDATES, FitScope, LearnerSpec, SimilarityThreshold,
                         normalize_forecaster, normalize_metric)

load_dotenv()


class Settings:
    """Process-wide defaults read from the environment (.env supported)."""

    def __init__(self):
        self.hourly_rate = float(os.getenv("SIMREUSE_HOURLY_RATE", 0.115))
        self.output_dir = os.getenv("SIMREUSE_OUTPUT_DIR", "./simreuse_out")
        self.database_url = os.getenv("DATABASE_URL")
        self.parallel_workers = max(1, int(os.getenv("PARALLEL_WORKERS", 4)))
        self.distance_cache_size = int(os.getenv("DISTANCE_CACHE_SIZE", 4096))
        self.log_level = os.getenv("LOG_LEVEL", "INFO").upper()


settings = Settings()

# Known public datasets: target column and samples per day
DATASET_PRESETS: Dict[str, Dict[str, Any]] = {
    "nsw_electricity": {"target_name": "nswprice", "samples_per_day": 48},
    "zurich_electricity": {"target_name": "Value_NE5", "samples_per_day": 96},
    "oil_temperature": {"target_name": "OT", "samples_per_day": 24},
    "weather": {"target_name": "T (degC)", "samples_per_day": 144},
}


class DatasetSection(BaseModel):
    path: Optional[str] = None
    preset: Optional[str] = None
    name: Optional[str] = None
    target_name: Optional[str] = None
    samples_per_day: Optional[int] = Field(default=None, ge=1)
    timestamp_column: str = "timestamp"
    timestamp_format: Optional[str] = None
    fit_scope: FitScope = Field(default_factory=FitScope)
    clamp: bool = False

    @field_validator("fit_scope", mode="before")
    @classmethod
    def parse_fit_scope(cls, v):
        return FitScope.parse(v) if isinstance(v, str) else v

    @model_validator(mode="after")
    def apply_preset(self):
        if self.preset:
            if self.preset not in DATASET_PRESETS:
                raise ValueError(f"Unknown dataset preset '{self.preset}'")
            preset = DATASET_PRESETS[self.preset]
            self.target_name = self.target_name or preset["target_name"]
            self.samples_per_day = self.samples_per_day or preset["samples_per_day"]
        return self


class WindowingSection(BaseModel):
    window_days: Union[int, Literal["auto"]] = 31
    candidates: List[int] = Field(default_factory=lambda: list(DEFAULT_SEGMENT_CANDIDATES))
    cv_folds: Optional[int] = Field(default=None, ge=2)

    @field_validator("window_days", mode="before")
    @classmethod
    def parse_window_days(cls, v):
        if isinstance(v, str) and v.strip().lower() != "auto":
            v = int(v)
        if isinstance(v, int) and v < 1:
            raise ValueError("window_days must be positive or 'auto'")
        return v


class ReuseSection(BaseModel):
    forecaster: str = "ES"
    metric: str = "WD"
    tvd_bins: int = Field(default=20, ge=1)
    threshold: SimilarityThreshold = Field(default_factory=SimilarityThreshold)
    seasonal_period: Optional[int] = Field(default=None, ge=1)
    mode: Literal["online", "precomputed"] = "online"
    sweep: bool = False

    @field_validator("forecaster")
    @classmethod
    def validate_forecaster(cls, v):
        return normalize_forecaster(v)

    @field_validator("metric")
    @classmethod
    def validate_metric(cls, v):
        return normalize_metric(v)


class CostSection(BaseModel):
    hourly_rate: float = Field(default_factory=lambda: settings.hourly_rate, ge=0.0)


class ExperimentConfig(BaseModel):
    """Every knob of one experiment; a fixed seed makes the run deterministic."""

    dataset: DatasetSection = Field(default_factory=DatasetSection)
    windowing: WindowingSection = Field(default_factory=WindowingSection)
    learner: LearnerSpec = Field(default_factory=LearnerSpec)
    reuse: ReuseSection = Field(default_factory=ReuseSection)
    cost: CostSection = Field(default_factory=CostSection)
    seed: int = 0
    output_dir: str = Field(default_factory=lambda: settings.output_dir)

    @property
    def dataset_path(self) -> Path:
        if not self.dataset.path:
            raise ConfigurationError("No dataset path configured (use --dataset or dataset.path)")
        return Path(self.dataset.path)

    def seeded_learner(self) -> LearnerSpec:
        return self.learner.model_copy(update={"seed": self.seed})


def _set_nested(data: Dict[str, Any], dotted_key: str, value: Any):
    section = data
    *parents, leaf = dotted_key.split(".")
    for key in parents:
        section = section.setdefault(key, {})
    section[leaf] = value


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Read the JSON config file (if any) and apply dotted-key overrides on top."""
    data: Dict[str, Any] = {}
    if path:
        config_path = Path(path)
        if not config_path.exists():
            raise ConfigurationError(f"Config file not found: {config_path}")
        try:
            data = json.loads(config_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"{config_path}: invalid JSON ({e})") from e

    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    learner_kind = overrides.pop("learner.kind", None)
    if learner_kind:
        # Switching learner kind resets the kind-specific defaults
        seed = data.get("learner", {}).get("seed", 0)
        data["learner"] = LearnerSpec.defaults(learner_kind, seed=seed).model_dump()
    for key, value in overrides.items():
        _set_nested(data, key, value)

    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid configuration: {e}") from e
