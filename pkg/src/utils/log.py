"""Logging setup with rich output."""

import logging
from typing import Optional

from rich.console import Console
from rich.logging import RichHandler

from .config import config

# Diagnostics go to stderr so command output on stdout stays clean
console = Console(stderr=True)

_HANDLER_NAME = "curvemix-rich"


def setup_logging(level: Optional[str] = None) -> logging.Logger:
    """
    Install a rich handler on the package logger.

    Args:
        level: Log level name; defaults to CURVEMIX_LOG from the environment

    Returns:
        The configured package logger
    """
    level_name = (level or config.log_level).upper()
    logger = logging.getLogger("src")
    logger.setLevel(getattr(logging, level_name, logging.WARNING))

    if not any(h.get_name() == _HANDLER_NAME for h in logger.handlers):
        handler = RichHandler(console=console, show_path=False, rich_tracebacks=True)
        handler.set_name(_HANDLER_NAME)
        handler.setFormatter(logging.Formatter("%(message)s"))
        logger.addHandler(handler)

    return logger
