"""Curvature of coordinate metrics, reduced Ricci flows and soliton checks."""

__version__ = "0.1.0"
