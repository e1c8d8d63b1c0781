"""
Section sensitivity estimation.
"""

from src.sensitivity.estimator import estimate_spec, symbol_name, totalize

__all__ = ["estimate_spec", "symbol_name", "totalize"]
