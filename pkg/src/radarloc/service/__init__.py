"""HTTP service exposing the localization pipeline."""

from .app import create_app

__all__ = ["create_app"]
