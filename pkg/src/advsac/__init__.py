"""Soft actor-critic with a learned adversary for robust control."""

__version__ = "0.1.0"
