"""Structural-entropy guided high-order feature selection for multi-view multi-label data."""

__version__ = "0.1.0"
