"""Discrete-event simulator of a moving-target DNS flood defence."""

__version__ = "0.1.0"
