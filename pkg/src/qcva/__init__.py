"""Simulated quantum CVA engine."""

__version__ = "0.1.0"
