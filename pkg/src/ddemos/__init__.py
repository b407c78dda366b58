"""Distributed, end-to-end verifiable elections without a single point of failure."""

__version__ = "0.1.0"
