"""Rank-based architecture performance prediction for cell search spaces."""

__version__ = "0.1.0"
