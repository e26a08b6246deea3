"""Functional and timing simulator for batched FFTs on HBM processing-in-memory."""

__version__ = "0.1.0"
