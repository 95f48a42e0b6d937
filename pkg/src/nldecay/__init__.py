"""Executable decay checks for nonlinear differential and integral inequalities."""

__version__ = "0.1.0"
