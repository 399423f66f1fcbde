"""Numerical laboratory for Dirichlet problems on perforated domains."""

__version__ = "0.1.0"
