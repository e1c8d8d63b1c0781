"""End-to-end error propagation over the section dataflow graph."""

from src.propagation.compose import compose, evaluate, phi_values, render, specialize

__all__ = ["compose", "evaluate", "phi_values", "render", "specialize"]
