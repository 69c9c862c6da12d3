"""Splitting-tree forests, their contour processes and time-reversal dualities."""

__version__ = "0.1.0"
