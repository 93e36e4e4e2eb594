"""Geometric PID control on Lie groups: library, benchmark plants, simulator."""

__version__ = "0.1.0"
