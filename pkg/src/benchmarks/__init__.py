"""
Benchmark corpus: asset loading, reference oracles and golden-output checks.
"""

from src.benchmarks.oracles import ORACLES
from src.benchmarks.suite import (
    BENCHMARKS,
    LoadedBenchmark,
    build_suite,
    check_coverage,
    epsilon_sweep,
    golden_trace,
    load_variant,
    verify_golden,
    verify_goldens,
)

__all__ = [
    "BENCHMARKS",
    "LoadedBenchmark",
    "ORACLES",
    "build_suite",
    "check_coverage",
    "epsilon_sweep",
    "golden_trace",
    "load_variant",
    "verify_golden",
    "verify_goldens",
]
