"""Frontier exploration simulator with path-entropy and spanning-tree utilities."""

__version__ = "0.2.0"
