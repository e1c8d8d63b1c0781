"""
Utility functions and helpers.

This package provides the bit-level, hashing and JSON helpers used throughout the pipeline.
"""
