"""Layered graph model trainer for relaug pipeline exports."""

__version__ = "0.1.0"
