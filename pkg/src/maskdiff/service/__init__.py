"""HTTP service wrapping the decoding engine."""

from .app import app

__all__ = ["app"]
