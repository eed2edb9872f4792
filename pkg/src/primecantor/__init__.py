"""Numerics for the prime continued-fraction Cantor set."""

__version__ = "0.1.0"
