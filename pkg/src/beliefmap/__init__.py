"""Belief-space flocking simulator with DTW phase analysis and trajectory maps."""

__version__ = "0.1.0"
