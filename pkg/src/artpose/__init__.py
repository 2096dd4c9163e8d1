"""Geometric core of category-level articulated-part pose and size estimation."""

__version__ = "0.1.0"
