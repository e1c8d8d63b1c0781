"""
Benchmark suite schemas.

This module provides the metadata of the shipped benchmark corpus and the
result of checking a benchmark's golden run against its reference outputs.
"""

from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field


class Variant(str, Enum):
    """Versions of a benchmark shipped next to the base program."""

    BASE = "base"
    SMALL = "small"
    LARGE = "large"
    ERRDETECT = "errdetect"


class BenchmarkInfo(BaseModel):
    """Static description of one benchmark."""

    model_config = ConfigDict(frozen=True)

    name: str
    description: str
    epsilons: Tuple[float, ...] = Field(
        (0.0, 0.01), description="SDC thresholds the benchmark is analyzed at"
    )
    variants: Tuple[Variant, ...] = (Variant.BASE,)
    output_changing: Tuple[Variant, ...] = Field(
        (), description="Variants whose golden outputs may differ slightly from the base"
    )
    coverage_exempt: Tuple[Variant, ...] = Field(
        (Variant.LARGE,), description="Variants with code paths that stay cold on the golden input"
    )


class BenchmarkSuite(BaseModel):
    """The benchmark corpus rooted at an asset directory."""

    model_config = ConfigDict(frozen=True)

    root: Path
    benchmarks: Dict[str, BenchmarkInfo]

    def info(self, name: str) -> BenchmarkInfo:
        try:
            return self.benchmarks[name]
        except KeyError:
            raise KeyError(f"Unknown benchmark '{name}'") from None

    def directory(self, name: str, variant: Variant = Variant.BASE) -> Path:
        base = self.root / name
        return base if variant is Variant.BASE else base / "variants" / variant.value


class GoldenCheck(BaseModel):
    """Outcome of comparing one variant's golden outputs with its reference."""

    benchmark: str
    variant: Variant
    passed: bool
    max_error: float = 0.0
    mismatches: List[str] = Field(default_factory=list)
    uncovered: Tuple[int, ...] = Field((), description="Static roi pcs never executed")
    message: Optional[str] = None
