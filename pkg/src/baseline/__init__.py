"""Monolithic baseline, utility metrics and target adjustment."""

from src.baseline.adjust import adjust_target, step_modification
from src.baseline.monolithic import (
    GroundTruth,
    achieved_value,
    categories,
    error_range,
    run_monolithic,
    utility_report,
)

__all__ = [
    "GroundTruth",
    "achieved_value",
    "adjust_target",
    "categories",
    "error_range",
    "run_monolithic",
    "step_modification",
    "utility_report",
]
