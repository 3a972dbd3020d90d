"""Structured-l1 estimation toolkit with dual-certificate checks."""
__version__ = "0.1.0"
