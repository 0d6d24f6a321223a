"""Kinodynamic multi-goal planning with a rapidly-exploring random forest."""

__version__ = "0.1.0"
