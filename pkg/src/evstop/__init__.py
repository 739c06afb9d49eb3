"""Likelihood inference for extreme-value samples whose size is set by a stopping rule."""

__version__ = "0.1.0"
