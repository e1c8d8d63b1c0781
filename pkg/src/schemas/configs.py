"""
Run configuration schemas.

This module provides the sensitivity estimation settings and the aggregated
run configuration consumed by the pipeline and the command line.
"""

import json
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from typing_extensions import Self

from src.config import settings
from src.errors import ConfigError
from src.schemas.injection import DetectorConfig, PruneConfig, SiteConfig
from src.schemas.program import SdcThresholds

DEFAULT_TARGETS: Tuple[float, ...] = (0.90, 0.95, 0.99, 1.00)


class PerturbationPattern(str, Enum):
    """Which input elements a sensitivity sample perturbs."""

    SINGLE = "single"
    SUBSET = "subset"
    ALL = "all"
    MIXED = "mixed"


class AnalysisMode(str, Enum):
    """Which analyses a run performs."""

    COMPOSITIONAL = "compositional"
    MONOLITHIC = "monolithic"
    BOTH = "both"


class SensitivityConfig(BaseModel):
    """Random-perturbation settings for Lipschitz constant estimation."""

    model_config = ConfigDict(frozen=True)

    phi_max: float = Field(0.01, gt=0.0, description="Maximum perturbation magnitude")
    samples: int = Field(10**6, ge=1, description="Perturbations per input region")
    seed: int = Field(0, description="Global seed; per-section streams are derived from it")
    pattern: PerturbationPattern = PerturbationPattern.MIXED


class RunConfig(BaseModel):
    """Every knob of one pipeline run.

    Command-line flags override the values loaded from a JSON config file one-to-one.
    """

    model_config = ConfigDict(extra="forbid")

    program: Optional[str] = Field(None, description="Path of the assembly source")
    layout: Optional[str] = Field(None, description="Path of the layout JSON document")
    thresholds: SdcThresholds = Field(default_factory=SdcThresholds)
    targets: Tuple[float, ...] = DEFAULT_TARGETS
    prune: PruneConfig = Field(default_factory=PruneConfig)
    sites: SiteConfig = Field(default_factory=SiteConfig)
    sensitivity: SensitivityConfig = Field(default_factory=SensitivityConfig)
    detector: DetectorConfig = Field(default_factory=DetectorConfig)
    mode: AnalysisMode = AnalysisMode.COMPOSITIONAL
    adjust_period: Optional[int] = Field(
        None, ge=1, description="P_adj; enables adjusted targets across program versions"
    )
    cache_dir: Optional[str] = None
    seed: Optional[int] = Field(None, description="Overrides the sensitivity seed")
    jobs: int = Field(default_factory=lambda: settings.jobs, ge=1)
    version: str = Field("v0", description="Program version label for the reports tree")

    @field_validator("targets", mode="before")
    @classmethod
    def _parse_targets(cls, v: Any) -> Any:
        if isinstance(v, str):
            return tuple(float(t) for t in v.split(",") if t.strip())
        return v

    @field_validator("targets")
    @classmethod
    def _targets_in_unit_interval(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        if not v:
            raise ValueError("at least one target is required")
        for target in v:
            if not 0.0 <= target <= 1.0:
                raise ValueError(f"target {target} outside [0, 1]")
        return tuple(sorted(v))

    @model_validator(mode="after")
    def _apply_seed(self) -> "RunConfig":
        if self.seed is not None and self.seed != self.sensitivity.seed:
            self.sensitivity = self.sensitivity.model_copy(update={"seed": self.seed})
        return self

    @classmethod
    def load(cls, path: Optional[str] = None, **overrides: Any) -> Self:
        """Load a configuration file and apply overrides that are not None.

        Args:
            path: Optional JSON configuration file
            **overrides: Field values taking precedence over the file

        Returns:
            The validated configuration

        Raises:
            ConfigError: If the file is missing or the configuration is invalid
        """
        data: Dict[str, Any] = {}
        if path:
            config_path = Path(path)
            if not config_path.is_file():
                raise ConfigError(f"Config file not found: {path}")
            try:
                data = json.loads(config_path.read_text(encoding="utf-8"))
            except json.JSONDecodeError as e:
                raise ConfigError(f"Config file {path} is not valid JSON: {e}")
        for key, value in overrides.items():
            if value is None:
                continue
            if isinstance(value, BaseModel):
                value = value.model_dump()
            if isinstance(value, dict) and isinstance(data.get(key), dict):
                data[key] = {**data[key], **value}
            else:
                data[key] = value
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigError(f"Invalid run configuration: {e}")
