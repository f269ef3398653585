"""Exact multi-access coded caching simulator and bound calculator."""

__version__ = "0.1.0"
