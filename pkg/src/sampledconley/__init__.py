"""Conley-index analysis of sampled dynamics on cubical grids."""

__version__ = "0.1.0"
