"""Temporal social-network analytics for crisis event streams."""

__version__ = "0.1.0"
