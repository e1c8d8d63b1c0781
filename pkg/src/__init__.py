"""
flipforge.

Compositional error-injection analysis and selective instruction protection for a
toy register machine.
"""

__version__ = "0.1.0"
