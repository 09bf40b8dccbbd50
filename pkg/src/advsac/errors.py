"""Exception hierarchy shared by every module."""

from __future__ import annotations


class AdvSacError(Exception):
    """Base class for all package errors."""


class DimensionError(AdvSacError, ValueError):
    """Vector or array lengths disagree with the declared layout."""


class DomainError(AdvSacError, ValueError):
    """A value lies outside its admissible range."""


class ProtocolError(AdvSacError, RuntimeError):
    """An operation was invoked out of order (e.g. step after done)."""


class ConfigError(AdvSacError, ValueError):
    """Invalid or inconsistent configuration."""
