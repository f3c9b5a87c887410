"""Boundary element methods for Maxwell-type equations on differential forms."""

__version__ = "0.1.0"
