"""Approximation of analytic Jordan domains by rational lemniscates."""

__version__ = "0.1.0"
