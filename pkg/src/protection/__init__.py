"""Per-instruction protection values and minimum-cost selection."""

from src.protection.knapsack import KnapsackTable, solve_knapsack, sweep, target_units
from src.protection.values import (
    build_model,
    compute_values,
    final_sdc_bad,
    identity_model,
    section_sdc_bad,
)

__all__ = [
    "KnapsackTable",
    "build_model",
    "compute_values",
    "final_sdc_bad",
    "identity_model",
    "section_sdc_bad",
    "solve_knapsack",
    "sweep",
    "target_units",
]
