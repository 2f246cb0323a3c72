"""Utility modules."""

from .config import Config, config
from .log import setup_logging

__all__ = ["config", "Config", "setup_logging"]
