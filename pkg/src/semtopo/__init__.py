"""Semantic-topometric exploration simulator and frontier-exploration baseline."""

__version__ = "0.1.0"
